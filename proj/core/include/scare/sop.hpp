#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace scare::sop {

/// One polarized variable occurrence inside a product term.
struct Literal {
  int variable = 0;
  bool complemented = false;

  friend bool operator==(const Literal&, const Literal&) = default;
};

/// A product term, stored as positive/negative variable masks. A variable may
/// appear in at most one polarity (x·x' terms are rejected at construction).
struct Minterm {
  uint32_t pos = 0; ///< variables required to be 1
  uint32_t neg = 0; ///< variables required to be 0

  int fanin() const;
  bool satisfied_by(uint32_t assignment) const {
    return (assignment & pos) == pos && (assignment & neg) == 0;
  }
  std::vector<Literal> literals() const;

  friend auto operator<=>(const Minterm&, const Minterm&) = default;
};

/// Boolean function in sum-of-products form over `variable_count` inputs.
/// Minterms are kept in insertion order; duplicates are rejected.
class SopFunction {
public:
  SopFunction() = default;
  explicit SopFunction(int variable_count) : variable_count_(variable_count) {}
  SopFunction(int variable_count, std::vector<Minterm> minterms);

  int variable_count() const { return variable_count_; }
  const std::vector<Minterm>& minterms() const { return minterms_; }
  int minterm_count() const { return static_cast<int>(minterms_.size()); }
  bool uses_complements() const;

  void add_minterm(const Minterm& m);

  friend bool operator==(const SopFunction&, const SopFunction&) = default;

private:
  int variable_count_ = 0;
  std::vector<Minterm> minterms_;
};

/// OR-of-ANDs structure summary: what the side-channel attack recovers.
struct StructureDescriptor {
  int or_fanin = 0;
  std::vector<int> and_fanins; ///< sorted ascending
  std::vector<int> complement_counts; ///< optional, per variable net polarity

  friend bool operator==(const StructureDescriptor&, const StructureDescriptor&) = default;
};

bool evaluate(const SopFunction& f, uint32_t assignment);
bool evaluate(const SopFunction& f, const std::vector<int>& assignment);

/// Full truth table as a bit-per-row vector, row index = assignment.
std::vector<bool> truth_table(const SopFunction& f);

/// Canonical expansion: every minterm mentions every variable. Preserves the
/// truth table; requires variable_count <= 12.
SopFunction expand_full(const SopFunction& f);

StructureDescriptor structure_of(const SopFunction& f);

/// Number of candidate minterms consistent with a recovered structure.
/// True-only: sum over distinct fanin values k of C(n, k). With complements
/// each of the k positions may be inverted, giving C(n, k) * 2^k (which is
/// 2^n at full fanin).
uint64_t candidate_space_size(const StructureDescriptor& s, int n_vars, bool allow_complements);

uint64_t binomial(int n, int k);

/// Text syntax: product terms joined by '+', complement as trailing '\''.
/// Variables are letters a..z (case-insensitive), "0" is the empty function.
SopFunction parse_function(const std::string& text, int variable_count = -1);
std::string format_function(const SopFunction& f);
std::string format_minterm(const Minterm& m);

} // namespace scare::sop

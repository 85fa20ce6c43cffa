#include "scare/sop.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <stdexcept>

namespace scare::sop {

int Minterm::fanin() const { return std::popcount(pos) + std::popcount(neg); }

std::vector<Literal> Minterm::literals() const {
  std::vector<Literal> out;
  for (int v = 0; v < 32; ++v) {
    if (pos & (1u << v)) out.push_back({v, false});
    if (neg & (1u << v)) out.push_back({v, true});
  }
  return out;
}

SopFunction::SopFunction(int variable_count, std::vector<Minterm> minterms)
    : variable_count_(variable_count) {
  for (const auto& m : minterms) add_minterm(m);
}

bool SopFunction::uses_complements() const {
  for (const auto& m : minterms_)
    if (m.neg) return true;
  return false;
}

void SopFunction::add_minterm(const Minterm& m) {
  if (m.pos & m.neg)
    throw std::invalid_argument("minterm contains a variable in both polarities");
  uint32_t used = m.pos | m.neg;
  if (variable_count_ < 32 && (used >> variable_count_) != 0)
    throw std::invalid_argument("minterm references a variable beyond variable_count");
  if (std::find(minterms_.begin(), minterms_.end(), m) != minterms_.end())
    throw std::invalid_argument("duplicate minterm");
  minterms_.push_back(m);
}

bool evaluate(const SopFunction& f, uint32_t assignment) {
  for (const auto& m : f.minterms())
    if (m.satisfied_by(assignment)) return true;
  return false;
}

bool evaluate(const SopFunction& f, const std::vector<int>& assignment) {
  if (static_cast<int>(assignment.size()) != f.variable_count())
    throw std::invalid_argument("assignment length does not match variable_count");
  uint32_t bits = 0;
  for (int i = 0; i < f.variable_count(); ++i)
    if (assignment[i]) bits |= 1u << i;
  return evaluate(f, bits);
}

std::vector<bool> truth_table(const SopFunction& f) {
  const uint32_t rows = 1u << f.variable_count();
  std::vector<bool> table(rows);
  for (uint32_t p = 0; p < rows; ++p) table[p] = evaluate(f, p);
  return table;
}

SopFunction expand_full(const SopFunction& f) {
  if (f.variable_count() > 12)
    throw std::invalid_argument("expand_full limited to 12 variables");
  const uint32_t rows = 1u << f.variable_count();
  const uint32_t all = rows - 1;
  SopFunction out(f.variable_count());
  for (uint32_t p = 0; p < rows; ++p) {
    if (evaluate(f, p)) out.add_minterm({p, all & ~p});
  }
  return out;
}

StructureDescriptor structure_of(const SopFunction& f) {
  StructureDescriptor s;
  s.or_fanin = f.minterm_count();
  for (const auto& m : f.minterms()) s.and_fanins.push_back(m.fanin());
  std::sort(s.and_fanins.begin(), s.and_fanins.end());
  return s;
}

uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  uint64_t r = 1;
  for (int i = 0; i < k; ++i) r = r * static_cast<uint64_t>(n - i) / static_cast<uint64_t>(i + 1);
  return r;
}

uint64_t candidate_space_size(const StructureDescriptor& s, int n_vars, bool allow_complements) {
  std::vector<int> distinct = s.and_fanins;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  uint64_t total = 0;
  for (int k : distinct) {
    if (k > n_vars) throw std::invalid_argument("fanin exceeds variable count");
    uint64_t c = binomial(n_vars, k);
    if (allow_complements) c <<= k;
    total += c;
  }
  return total;
}

SopFunction parse_function(const std::string& text, int variable_count) {
  std::vector<Minterm> terms;
  int max_var = -1;
  Minterm cur;
  bool cur_has_literal = false;
  bool saw_zero = false;

  auto flush = [&] {
    if (cur_has_literal) terms.push_back(cur);
    cur = Minterm{};
    cur_has_literal = false;
  };

  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    if (c == '+') {
      flush();
      continue;
    }
    if (c == '0' && !cur_has_literal) {
      saw_zero = true;
      continue;
    }
    if (!std::isalpha(static_cast<unsigned char>(c)))
      throw std::invalid_argument(std::string("unexpected character '") + c + "' in function text");
    int v = std::tolower(static_cast<unsigned char>(c)) - 'a';
    bool comp = (i + 1 < text.size() && text[i + 1] == '\'');
    if (comp) ++i;
    uint32_t bit = 1u << v;
    if ((cur.pos | cur.neg) & bit)
      throw std::invalid_argument("variable repeated within a product term");
    (comp ? cur.neg : cur.pos) |= bit;
    cur_has_literal = true;
    max_var = std::max(max_var, v);
  }
  flush();

  if (terms.empty() && !saw_zero && text.find_first_not_of(" \t") == std::string::npos)
    throw std::invalid_argument("empty function text");

  int n = variable_count >= 0 ? variable_count : max_var + 1;
  if (max_var >= n) throw std::invalid_argument("function references more variables than declared");
  return SopFunction(n, terms);
}

std::string format_minterm(const Minterm& m) {
  std::string s;
  for (int v = 0; v < 32; ++v) {
    if (m.pos & (1u << v)) s += static_cast<char>('a' + v);
    if (m.neg & (1u << v)) {
      s += static_cast<char>('a' + v);
      s += '\'';
    }
  }
  return s;
}

std::string format_function(const SopFunction& f) {
  if (f.minterms().empty()) return "0";
  std::string s;
  for (size_t i = 0; i < f.minterms().size(); ++i) {
    if (i) s += '+';
    s += format_minterm(f.minterms()[i]);
  }
  return s;
}

} // namespace scare::sop

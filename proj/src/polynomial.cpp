#include "polydepth/polynomial.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>

#include "polydepth/error.hpp"

namespace polydepth {

namespace {

struct RawFactor {
  std::size_t var;  // 1-based
  Exponent power;
};

struct RawTerm {
  double coefficient = 1.0;
  std::vector<RawFactor> factors;
};

class Parser {
 public:
  explicit Parser(std::string_view text) {
    for (char ch : text)
      if (!std::isspace(static_cast<unsigned char>(ch))) s_ += ch;
  }

  std::vector<RawTerm> parse() {
    std::vector<RawTerm> terms;
    require(!s_.empty(), ErrorCode::Parse, "empty polynomial");
    bool first = true;
    while (pos_ < s_.size()) {
      double sign = 1.0;
      if (peek() == '+' || peek() == '-') {
        sign = peek() == '-' ? -1.0 : 1.0;
        ++pos_;
      } else if (!first) {
        error("expected '+' or '-'");
      }
      first = false;
      RawTerm t = term();
      t.coefficient *= sign;
      terms.push_back(std::move(t));
    }
    return terms;
  }

 private:
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::Parse, what + " at offset " + std::to_string(pos_) + " in '" + s_ + "'");
  }

  RawTerm term() {
    RawTerm t;
    bool any = false;
    while (true) {
      const char c = peek();
      if (c == 'x' || c == 'X') {
        ++pos_;
        const auto var = integer();
        require(var >= 1, ErrorCode::Parse, "variables are numbered from x1");
        Exponent power = 1;
        if (peek() == '^') {
          ++pos_;
          power = static_cast<Exponent>(integer());
        }
        t.factors.push_back({var, power});
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        t.coefficient *= number();
      } else {
        error(any ? "expected a factor after '*'" : "expected a term");
      }
      any = true;
      if (peek() == '*') {
        ++pos_;
        continue;
      }
      break;
    }
    return t;
  }

  std::size_t integer() {
    const std::size_t start = pos_;
    while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    if (start == pos_) error("expected an integer");
    return std::stoul(s_.substr(start, pos_ - start));
  }

  double number() {
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) error("expected a number");
    pos_ += static_cast<std::size_t>(end - begin);
    return v;
  }

  std::string s_;
  std::size_t pos_ = 0;
};

std::string format_coeff(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

SparsePolynomial::SparsePolynomial(std::size_t n, std::vector<Monomial> monomials) : n_(n) {
  // Merge duplicates exactly in a map ordered by graded-lex rank.
  std::map<std::uint64_t, Monomial> by_rank;
  for (auto& m : monomials) {
    require(m.exponents.size() == n, ErrorCode::DimensionMismatch,
            "monomial has " + std::to_string(m.exponents.size()) + " exponents, expected " +
                std::to_string(n));
    require(std::isfinite(m.coefficient), ErrorCode::InvalidArgument,
            "non-finite polynomial coefficient");
    const auto key = graded_lex_rank(m.exponents.values());
    auto [it, inserted] = by_rank.try_emplace(key, m);
    if (!inserted) it->second.coefficient += m.coefficient;
  }
  for (auto& [key, m] : by_rank)
    if (m.coefficient != 0.0) monomials_.push_back(std::move(m));
}

SparsePolynomial SparsePolynomial::monomial(const ExponentVector& r, double coefficient) {
  return SparsePolynomial(r.size(), {{coefficient, r}});
}

SparsePolynomial SparsePolynomial::parse(std::string_view text, std::size_t n) {
  const auto raw = Parser(text).parse();
  std::size_t max_var = 0;
  for (const auto& t : raw)
    for (const auto& f : t.factors) max_var = std::max(max_var, f.var);
  if (n == 0) n = std::max<std::size_t>(max_var, 1);
  require(max_var <= n, ErrorCode::DimensionMismatch,
          "polynomial uses x" + std::to_string(max_var) + " but n=" + std::to_string(n));
  std::vector<Monomial> ms;
  for (const auto& t : raw) {
    ExponentVector e(n);
    for (const auto& f : t.factors) e[f.var - 1] += f.power;
    ms.push_back({t.coefficient, std::move(e)});
  }
  return SparsePolynomial(n, std::move(ms));
}

unsigned SparsePolynomial::degree() const {
  unsigned d = 0;
  for (const auto& m : monomials_) d = std::max(d, m.exponents.degree());
  return d;
}

bool SparsePolynomial::is_homogeneous() const {
  if (monomials_.empty()) return true;
  const auto d = monomials_.front().exponents.degree();
  return std::all_of(monomials_.begin(), monomials_.end(),
                     [d](const Monomial& m) { return m.exponents.degree() == d; });
}

double SparsePolynomial::constant_term() const {
  if (!monomials_.empty() && monomials_.front().exponents.degree() == 0)
    return monomials_.front().coefficient;
  return 0.0;
}

double SparsePolynomial::evaluate(std::span<const double> x) const {
  require(x.size() == n_, ErrorCode::DimensionMismatch, "evaluation point has wrong length");
  double total = 0.0;
  for (const auto& m : monomials_) {
    double v = m.coefficient;
    for (std::size_t i = 0; i < n_; ++i)
      for (Exponent k = 0; k < m.exponents[i]; ++k) v *= x[i];
    total += v;
  }
  return total;
}

std::string SparsePolynomial::to_string() const {
  if (monomials_.empty()) return "0";
  std::string out;
  for (std::size_t j = 0; j < monomials_.size(); ++j) {
    const auto& m = monomials_[j];
    double c = m.coefficient;
    if (j > 0) {
      out += c < 0 ? " - " : " + ";
      c = std::abs(c);
    } else if (c < 0) {
      out += "-";
      c = -c;
    }
    std::string body;
    for (std::size_t i = 0; i < n_; ++i) {
      if (m.exponents[i] == 0) continue;
      if (!body.empty()) body += '*';
      body += "x" + std::to_string(i + 1);
      if (m.exponents[i] > 1) body += "^" + std::to_string(m.exponents[i]);
    }
    if (body.empty()) {
      out += format_coeff(c);
    } else if (c != 1.0) {
      out += format_coeff(c) + "*" + body;
    } else {
      out += body;
    }
  }
  return out;
}

bool operator==(const SparsePolynomial& a, const SparsePolynomial& b) {
  if (a.n_ != b.n_ || a.monomials_.size() != b.monomials_.size()) return false;
  for (std::size_t i = 0; i < a.monomials_.size(); ++i) {
    if (a.monomials_[i].coefficient != b.monomials_[i].coefficient) return false;
    if (!(a.monomials_[i].exponents == b.monomials_[i].exponents)) return false;
  }
  return true;
}

TruncatedSeries series_from_polynomial(const SparsePolynomial& p, unsigned cap) {
  require(cap >= p.degree(), ErrorCode::InvalidArgument,
          "cap " + std::to_string(cap) + " below polynomial degree " +
              std::to_string(p.degree()));
  std::vector<TruncatedSeries::Term> terms;
  for (const auto& m : p.monomials()) terms.push_back({m.exponents, m.coefficient});
  return TruncatedSeries::from_terms(p.variables(), cap, terms);
}

SparsePolynomial polynomial_from_series(const TruncatedSeries& s) {
  std::vector<Monomial> ms;
  for (auto& t : s.terms()) ms.push_back({t.coefficient, std::move(t.exponents)});
  return SparsePolynomial(s.variables(), std::move(ms));
}

}  // namespace polydepth

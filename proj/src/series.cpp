#include "polydepth/series.hpp"

#include <algorithm>
#include <array>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "polydepth/error.hpp"
#include "polydepth/nonlinearity.hpp"

namespace polydepth {

namespace {

constexpr std::size_t kMaxVars = 64;
constexpr std::size_t kMaxTop = 640;
constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

// binom(a, b) for a < kMaxTop, b <= kMaxVars; saturates at UINT64_MAX.
class BinomialTable {
 public:
  BinomialTable() : t_(kMaxTop * (kMaxVars + 1), 0) {
    for (std::size_t a = 0; a < kMaxTop; ++a) {
      at(a, 0) = 1;
      for (std::size_t b = 1; b <= std::min(a, kMaxVars); ++b) {
        const std::uint64_t x = at(a - 1, b - 1);
        const std::uint64_t y = b <= a - 1 ? at(a - 1, b) : 0;
        at(a, b) = (x > kSaturated - y) ? kSaturated : x + y;
      }
    }
  }
  std::uint64_t operator()(std::size_t a, std::size_t b) const {
    if (b > a) return 0;
    if (a >= kMaxTop || b > kMaxVars) return kSaturated;
    return t_[a * (kMaxVars + 1) + b];
  }

 private:
  std::uint64_t& at(std::size_t a, std::size_t b) { return t_[a * (kMaxVars + 1) + b]; }
  std::vector<std::uint64_t> t_;
};

const BinomialTable& binom() {
  static const BinomialTable table;
  return table;
}

// Number of monomials in n variables with total degree <= cap.
std::uint64_t index_space(std::size_t n, unsigned cap) { return binom()(n + cap, n); }

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

unsigned ExponentVector::degree() const noexcept {
  return std::accumulate(e_.begin(), e_.end(), 0u);
}

std::string ExponentVector::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < e_.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(e_[i]);
  }
  return s;
}

bool graded_lex_less(std::span<const Exponent> a, std::span<const Exponent> b) {
  const auto da = std::accumulate(a.begin(), a.end(), 0u);
  const auto db = std::accumulate(b.begin(), b.end(), 0u);
  if (da != db) return da < db;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
    if (a[i] != b[i]) return a[i] > b[i];
  return a.size() < b.size();
}

std::uint64_t graded_lex_rank(std::span<const Exponent> e) {
  const std::size_t n = e.size();
  const unsigned t = std::accumulate(e.begin(), e.end(), 0u);
  if (t == 0) return 0;
  const auto& C = binom();
  std::uint64_t r = C(n + t - 1, n);
  unsigned rem = t;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t m = n - i - 1;
    if (rem > e[i]) r += C(rem - e[i] - 1 + m, m);
    rem -= e[i];
  }
  return r;
}

ExponentVector graded_lex_unrank(std::uint64_t rank, std::size_t n) {
  const auto& C = binom();
  ExponentVector e(n);
  if (n == 0) return e;
  unsigned t = 0;
  while (C(n + t, n) <= rank) ++t;
  std::uint64_t within = rank - (t == 0 ? 0 : C(n + t - 1, n));
  unsigned rem = t;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t m = n - i - 1;
    for (unsigned v = rem;; --v) {
      const std::uint64_t block = C(rem - v + m - 1, m - 1);
      if (within < block) {
        e[i] = v;
        rem -= v;
        break;
      }
      within -= block;
    }
  }
  e[n - 1] = rem;
  return e;
}

// Sums coefficients keyed by graded-lex rank. Small index spaces use a reusable
// dense buffer; large ones fall back to a hash map.
class TruncatedSeries::Accumulator {
 public:
  Accumulator(const Accumulator&) = delete;
  Accumulator& operator=(const Accumulator&) = delete;
  ~Accumulator() {
    if (dense_) {
      for (auto k : touched_) {
        buffer()[k] = 0.0;
        marks()[k] = 0;
      }
      in_use() = false;
    }
  }

  Accumulator(std::size_t n, unsigned cap) : n_(n), cap_(cap) {
    const std::uint64_t space = index_space(n, cap);
    dense_ = space <= kDenseLimit && !in_use();
    if (dense_) {
      in_use() = true;
      auto& buf = buffer();
      if (buf.size() < space) buf.resize(space, 0.0);
      auto& mk = marks();
      if (mk.size() < space) mk.resize(space, 0);
    }
  }

  void add(std::uint64_t key, double value) {
    if (dense_) {
      auto& mk = marks();
      if (!mk[key]) {
        mk[key] = 1;
        touched_.push_back(key);
      }
      buffer()[key] += value;
    } else {
      sparse_[key] += value;
    }
  }

  TruncatedSeries finish() {
    TruncatedSeries out(n_, cap_);
    std::vector<std::pair<std::uint64_t, double>> items;
    if (dense_) {
      auto& buf = buffer();
      auto& mk = marks();
      items.reserve(touched_.size());
      for (auto k : touched_) {
        if (buf[k] != 0.0) items.emplace_back(k, buf[k]);
        buf[k] = 0.0;
        mk[k] = 0;
      }
      touched_.clear();
      in_use() = false;
      dense_ = false;
    } else {
      items.reserve(sparse_.size());
      for (const auto& [k, v] : sparse_)
        if (v != 0.0) items.emplace_back(k, v);
    }
    std::sort(items.begin(), items.end());
    out.keys_.reserve(items.size());
    out.coeffs_.reserve(items.size());
    out.exps_.reserve(items.size() * n_);
    for (const auto& [k, v] : items) {
      out.keys_.push_back(k);
      out.coeffs_.push_back(v);
      const auto e = graded_lex_unrank(k, n_);
      out.exps_.insert(out.exps_.end(), e.values().begin(), e.values().end());
    }
    return out;
  }

 private:
  static constexpr std::uint64_t kDenseLimit = std::uint64_t{1} << 20;

  static std::vector<double>& buffer() {
    thread_local std::vector<double> buf;
    return buf;
  }
  // Only one dense accumulator per thread may hold the shared buffer.
  static bool& in_use() {
    thread_local bool flag = false;
    return flag;
  }
  static std::vector<unsigned char>& marks() {
    thread_local std::vector<unsigned char> m;
    return m;
  }

  std::size_t n_;
  unsigned cap_;
  bool dense_ = false;
  std::vector<std::uint64_t> touched_;
  std::unordered_map<std::uint64_t, double> sparse_;
};

TruncatedSeries::TruncatedSeries(std::size_t n, unsigned cap) : n_(n), cap_(cap) {
  require(n <= kMaxVars, ErrorCode::InvalidArgument,
          "series supports at most " + std::to_string(kMaxVars) + " variables");
  require(n + cap < kMaxTop && index_space(n, cap) < (std::uint64_t{1} << 62),
          ErrorCode::InvalidArgument,
          "monomial index space too large for n=" + std::to_string(n) +
              ", cap=" + std::to_string(cap));
}

TruncatedSeries TruncatedSeries::constant(std::size_t n, unsigned cap, double value) {
  TruncatedSeries s(n, cap);
  if (value != 0.0) {
    s.keys_.push_back(0);
    s.exps_.assign(n, 0);
    s.coeffs_.push_back(value);
  }
  return s;
}

TruncatedSeries TruncatedSeries::variable(std::size_t n, unsigned cap, std::size_t index) {
  require(index < n, ErrorCode::DimensionMismatch, "variable index out of range");
  TruncatedSeries s(n, cap);
  if (cap >= 1) {
    ExponentVector e(n);
    e[index] = 1;
    s.keys_.push_back(graded_lex_rank(e.values()));
    s.exps_ = std::vector<Exponent>(e.values().begin(), e.values().end());
    s.coeffs_.push_back(1.0);
  }
  return s;
}

TruncatedSeries TruncatedSeries::from_terms(std::size_t n, unsigned cap,
                                            const std::vector<Term>& terms) {
  Accumulator acc(n, cap);
  for (const auto& t : terms) {
    require(t.exponents.size() == n, ErrorCode::DimensionMismatch,
            "term has " + std::to_string(t.exponents.size()) + " exponents, expected " +
                std::to_string(n));
    if (t.exponents.degree() > cap) continue;
    acc.add(graded_lex_rank(t.exponents.values()), t.coefficient);
  }
  return acc.finish();
}

void TruncatedSeries::check_compatible(const TruncatedSeries& other) const {
  require(n_ == other.n_ && cap_ == other.cap_, ErrorCode::DimensionMismatch,
          "series mismatch: (n=" + std::to_string(n_) + ", cap=" + std::to_string(cap_) +
              ") vs (n=" + std::to_string(other.n_) + ", cap=" + std::to_string(other.cap_) +
              ")");
}

double TruncatedSeries::coefficient(const ExponentVector& e) const {
  require(e.size() == n_, ErrorCode::DimensionMismatch, "exponent vector length mismatch");
  const auto key = graded_lex_rank(e.values());
  const auto it = std::lower_bound(keys_.begin(), keys_.end(), key);
  if (it == keys_.end() || *it != key) return 0.0;
  return coeffs_[static_cast<std::size_t>(it - keys_.begin())];
}

double TruncatedSeries::constant_term() const {
  return (!keys_.empty() && keys_.front() == 0) ? coeffs_.front() : 0.0;
}

TruncatedSeries::Term TruncatedSeries::term(std::size_t i) const {
  auto e = exponents_of(i);
  return {ExponentVector(std::vector<Exponent>(e.begin(), e.end())), coeffs_[i]};
}

std::vector<TruncatedSeries::Term> TruncatedSeries::terms() const {
  std::vector<Term> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(term(i));
  return out;
}

unsigned TruncatedSeries::degree_at(std::size_t i) const {
  auto e = exponents_of(i);
  return std::accumulate(e.begin(), e.end(), 0u);
}

unsigned TruncatedSeries::min_positive_degree() const {
  for (std::size_t i = 0; i < size(); ++i)
    if (const auto d = degree_at(i); d > 0) return d;
  return cap_ + 1;
}

unsigned TruncatedSeries::max_degree() const { return empty() ? 0 : degree_at(size() - 1); }

TruncatedSeries TruncatedSeries::truncated(unsigned new_cap) const {
  TruncatedSeries out(n_, new_cap);
  for (std::size_t i = 0; i < size(); ++i) {
    if (degree_at(i) > new_cap) break;
    out.keys_.push_back(keys_[i]);
    out.coeffs_.push_back(coeffs_[i]);
    auto e = exponents_of(i);
    out.exps_.insert(out.exps_.end(), e.begin(), e.end());
  }
  return out;
}

TruncatedSeries TruncatedSeries::homogeneous_part(unsigned degree) const {
  TruncatedSeries out(n_, cap_);
  for (std::size_t i = 0; i < size(); ++i) {
    if (degree_at(i) != degree) continue;
    out.keys_.push_back(keys_[i]);
    out.coeffs_.push_back(coeffs_[i]);
    auto e = exponents_of(i);
    out.exps_.insert(out.exps_.end(), e.begin(), e.end());
  }
  return out;
}

TruncatedSeries TruncatedSeries::scaled(double factor) const {
  if (factor == 0.0) return TruncatedSeries(n_, cap_);
  TruncatedSeries out = *this;
  for (auto& c : out.coeffs_) c *= factor;
  // Underflow to zero must not leave a stored zero.
  if (std::any_of(out.coeffs_.begin(), out.coeffs_.end(), [](double c) { return c == 0.0; })) {
    return from_terms(n_, cap_, out.terms());
  }
  return out;
}

TruncatedSeries TruncatedSeries::shifted(double constant) const {
  return series_add(*this, TruncatedSeries::constant(n_, cap_, constant));
}

double TruncatedSeries::evaluate(std::span<const double> x) const {
  require(x.size() == n_, ErrorCode::DimensionMismatch, "evaluation point has wrong length");
  double total = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    double m = coeffs_[i];
    auto e = exponents_of(i);
    for (std::size_t v = 0; v < n_; ++v)
      if (e[v]) m *= std::pow(x[v], static_cast<double>(e[v]));
    total += m;
  }
  return total;
}

double TruncatedSeries::max_abs_difference(const TruncatedSeries& other) const {
  check_compatible(other);
  double worst = 0.0;
  std::size_t i = 0, j = 0;
  while (i < size() || j < other.size()) {
    if (j == other.size() || (i < size() && keys_[i] < other.keys_[j])) {
      worst = std::max(worst, std::abs(coeffs_[i++]));
    } else if (i == size() || other.keys_[j] < keys_[i]) {
      worst = std::max(worst, std::abs(other.coeffs_[j++]));
    } else {
      worst = std::max(worst, std::abs(coeffs_[i++] - other.coeffs_[j++]));
    }
  }
  return worst;
}

std::string TruncatedSeries::to_text() const {
  std::string out;
  for (std::size_t i = 0; i < size(); ++i) {
    auto e = exponents_of(i);
    for (std::size_t v = 0; v < n_; ++v) {
      if (v) out += ',';
      out += std::to_string(e[v]);
    }
    out += " : ";
    out += format_double(coeffs_[i]);
    out += '\n';
  }
  return out;
}

TruncatedSeries TruncatedSeries::from_text(std::size_t n, unsigned cap, const std::string& text) {
  std::vector<Term> terms;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto colon = line.find(':');
    require(colon != std::string::npos, ErrorCode::Parse, "series line lacks ':' : " + line);
    std::vector<Exponent> e;
    std::istringstream lhs(line.substr(0, colon));
    std::string tok;
    while (std::getline(lhs, tok, ',')) e.push_back(static_cast<Exponent>(std::stoul(tok)));
    terms.push_back({ExponentVector(std::move(e)), std::stod(line.substr(colon + 1))});
  }
  return from_terms(n, cap, terms);
}

TruncatedSeries series_add(const TruncatedSeries& a, const TruncatedSeries& b) {
  a.check_compatible(b);
  TruncatedSeries out(a.n_, a.cap_);
  const std::size_t n = a.n_;
  auto push = [&](std::uint64_t k, const Exponent* e, double c) {
    if (c == 0.0) return;
    out.keys_.push_back(k);
    out.exps_.insert(out.exps_.end(), e, e + n);
    out.coeffs_.push_back(c);
  };
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a.keys_[i] < b.keys_[j])) {
      push(a.keys_[i], a.exps_.data() + i * n, a.coeffs_[i]);
      ++i;
    } else if (i == a.size() || b.keys_[j] < a.keys_[i]) {
      push(b.keys_[j], b.exps_.data() + j * n, b.coeffs_[j]);
      ++j;
    } else {
      push(a.keys_[i], a.exps_.data() + i * n, a.coeffs_[i] + b.coeffs_[j]);
      ++i;
      ++j;
    }
  }
  return out;
}

TruncatedSeries series_sub(const TruncatedSeries& a, const TruncatedSeries& b) {
  return series_add(a, b.scaled(-1.0));
}

TruncatedSeries series_mul(const TruncatedSeries& a, const TruncatedSeries& b) {
  a.check_compatible(b);
  const std::size_t n = a.n_;
  const unsigned cap = a.cap_;
  if (a.empty() || b.empty()) return TruncatedSeries(n, cap);

  // end_by_degree[t] = number of b terms with degree <= t (terms are degree-sorted).
  std::vector<std::size_t> end_by_degree(cap + 1, 0);
  {
    std::size_t j = 0;
    for (unsigned t = 0; t <= cap; ++t) {
      while (j < b.size() && b.degree_at(j) <= t) ++j;
      end_by_degree[t] = j;
    }
  }

  TruncatedSeries::Accumulator acc(n, cap);
  std::vector<Exponent> sum(n);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const unsigned da = a.degree_at(i);
    if (da > cap) break;
    const Exponent* ea = a.exps_.data() + i * n;
    const double ca = a.coeffs_[i];
    const std::size_t jend = end_by_degree[cap - da];
    for (std::size_t j = 0; j < jend; ++j) {
      const Exponent* eb = b.exps_.data() + j * n;
      for (std::size_t v = 0; v < n; ++v) sum[v] = ea[v] + eb[v];
      acc.add(graded_lex_rank(sum), ca * b.coeffs_[j]);
    }
  }
  return acc.finish();
}

TruncatedSeries linear_combination(std::span<const TruncatedSeries* const> parts,
                                   std::span<const double> weights, double bias, std::size_t n,
                                   unsigned cap) {
  require(parts.size() == weights.size(), ErrorCode::DimensionMismatch,
          "linear_combination: parts/weights length mismatch");
  TruncatedSeries::Accumulator acc(n, cap);
  if (bias != 0.0) acc.add(0, bias);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& s = *parts[p];
    require(s.n_ == n && s.cap_ == cap, ErrorCode::DimensionMismatch,
            "linear_combination: series mismatch");
    const double w = weights[p];
    if (w == 0.0) continue;
    for (std::size_t i = 0; i < s.size(); ++i) acc.add(s.keys_[i], w * s.coeffs_[i]);
  }
  return acc.finish();
}

TruncatedSeries series_compose(const Nonlinearity& sigma, const TruncatedSeries& inner) {
  require(sigma.analytic(), ErrorCode::Domain,
          "cannot compose non-analytic activation '" + sigma.name() + "'");
  const double c = inner.constant_term();
  const TruncatedSeries h = c == 0.0 ? inner : inner.shifted(-c);
  const unsigned m = h.min_positive_degree();
  const unsigned top = m > inner.cap() ? 0 : inner.cap() / m;
  const auto coeff = sigma.taylor(c, top + 1);

  // Horner: sigma_top, then r <- r*h + sigma_k.
  TruncatedSeries r = TruncatedSeries::constant(inner.variables(), inner.cap(), coeff[top]);
  for (unsigned k = top; k-- > 0;) {
    r = series_mul(r, h);
    if (coeff[k] != 0.0) r = r.shifted(coeff[k]);
  }
  return r;
}

}  // namespace polydepth

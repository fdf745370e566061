/// @file nonlinearity.hpp
/// @brief Parse and evaluate the right-hand side f(z,u), its antiderivative
///        F(z,u) = int_0^u f(z,s) ds, and the explicit-z partials dF/dz_k.
///
/// The catalog is closed: every expression canonicalizes to a sum of terms
/// c * z^alpha * g(u) with g in {1, u, |u|^{q-1} u} and z^alpha a monomial of
/// total degree <= 4.  This keeps F and grad_z F exact (computed symbolically
/// term by term) instead of numerically integrated.
///
/// Grammar (ASCII):
///   EXPR   := ['+'|'-'] TERM (('+'|'-') TERM)*
///   TERM   := FACTOR ('*' FACTOR)*
///   FACTOR := NUMBER | COORD | 'u' | 'abspow(u,' NUMBER ')' | '(' EXPR ')'
///   COORD  := 'x1'..'xN' | 'y1'..'yl'
///
/// abspow(u,q) denotes the odd power |u|^{q-1} u with q > 0.

#ifndef GRUSHIN_NONLINEARITY_HPP
#define GRUSHIN_NONLINEARITY_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "grushin/geometry.hpp"

namespace grushin {

/// Syntax or validation error with the offending position in the input text.
struct ParseError : std::runtime_error {
  size_t position;
  ParseError(const std::string& msg, size_t pos)
      : std::runtime_error(msg + " (at position " + std::to_string(pos) + ")"), position(pos) {}
};

inline constexpr int kMaxPolyDegree = 4;

/// How a catalog term depends on u.
enum class UKind { One, Linear, AbsPow };

/// One canonical term c * z^expo * g(u).
struct NlTerm {
  double coeff = 0.0;
  std::array<int, kMaxDim> expo{};  ///< monomial exponents, total degree <= 4
  UKind ukind = UKind::One;
  double q = 0.0;  ///< exponent for UKind::AbsPow

  int total_degree() const {
    int d = 0;
    for (int e : expo) d += e;
    return d;
  }
};

namespace detail {

/// Intermediate parse value: a sum of canonical terms.
using TermSum = std::vector<NlTerm>;

inline NlTerm term_mul(const NlTerm& a, const NlTerm& b, size_t pos) {
  NlTerm r;
  r.coeff = a.coeff * b.coeff;
  for (size_t k = 0; k < a.expo.size(); ++k) r.expo[k] = a.expo[k] + b.expo[k];
  if (r.total_degree() > kMaxPolyDegree)
    throw ParseError("polynomial total degree exceeds " + std::to_string(kMaxPolyDegree), pos);
  if (a.ukind == UKind::One) {
    r.ukind = b.ukind;
    r.q = b.q;
  } else if (b.ukind == UKind::One) {
    r.ukind = a.ukind;
    r.q = a.q;
  } else {
    throw ParseError("product of two u-dependent factors is outside the catalog", pos);
  }
  return r;
}

inline TermSum sum_mul(const TermSum& a, const TermSum& b, size_t pos) {
  TermSum r;
  r.reserve(a.size() * b.size());
  for (const auto& ta : a)
    for (const auto& tb : b) r.push_back(term_mul(ta, tb, pos));
  return r;
}

struct Lexer {
  const std::string& text;
  size_t pos = 0;
  explicit Lexer(const std::string& t) : text(t) {}

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  bool eof() {
    skip_ws();
    return pos >= text.size();
  }
  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }
  bool accept(char c) {
    skip_ws();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c) {
    skip_ws();
    if (!accept(c)) throw ParseError(std::string("expected '") + c + "'", pos);
  }
  double number() {
    skip_ws();
    const char* start = text.c_str() + pos;
    char* end = nullptr;
    double v = std::strtod(start, &end);
    if (end == start) throw ParseError("expected a number", pos);
    pos += static_cast<size_t>(end - start);
    return v;
  }
  std::string identifier() {
    skip_ws();
    size_t s = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      ++pos;
    return text.substr(s, pos - s);
  }
};

}  // namespace detail

/// Evaluable nonlinearity: f, its exact antiderivative F, and grad_z F.
class Nonlinearity {
 public:
  Nonlinearity() = default;

  /// Parse an expression over coordinates x1..xN, y1..yl and the unknown u.
  static Nonlinearity parse(const std::string& text, int N, int l) {
    detail::Lexer lex(text);
    Nonlinearity nl;
    nl.N_ = N;
    nl.l_ = l;
    detail::TermSum sum = parse_expr(lex, N, l);
    if (!lex.eof()) throw ParseError("unexpected trailing input", lex.pos);
    nl.terms_ = canonicalize(sum);
    return nl;
  }

  /// f(z, u).
  double f(const Point& z, double u) const {
    double s = 0.0;
    for (const auto& t : terms_) s += t.coeff * monomial(z, t.expo) * g_of_u(t, u);
    return s;
  }

  /// F(z, u) = int_0^u f(z, s) ds; F(z, 0) = 0 by construction.
  double F(const Point& z, double u) const {
    double s = 0.0;
    for (const auto& t : terms_) s += t.coeff * monomial(z, t.expo) * G_of_u(t, u);
    return s;
  }

  /// Explicit-z gradient of F with u held fixed.
  Point dF_dz(const Point& z, double u) const {
    Point out = make_point();
    for (const auto& t : terms_) {
      const double Gu = G_of_u(t, u);
      if (Gu == 0.0) continue;
      for (int k = 0; k < N_ + l_; ++k) {
        if (t.expo[k] == 0) continue;
        out[k] += t.coeff * Gu * monomial_derivative(z, t.expo, k);
      }
    }
    return out;
  }

  /// Effective u-dependence: any surviving term with a u-dependent factor.
  bool depends_on_u() const {
    for (const auto& t : terms_)
      if (t.coeff != 0.0 && t.ukind != UKind::One) return true;
    return false;
  }

  /// Canonical printout; parse(print()) reproduces an equivalent structure.
  std::string print() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    os.precision(17);
    bool first = true;
    for (const auto& t : terms_) {
      // Negative coefficients print through the '-' separator: the grammar
      // has no signed literals, so "a + -1*u" would not re-parse.
      const bool neg = std::signbit(t.coeff);
      if (!first)
        os << (neg ? " - " : " + ");
      else if (neg)
        os << "-";
      first = false;
      os << std::abs(t.coeff);
      for (int k = 0; k < N_ + l_; ++k)
        for (int e = 0; e < t.expo[k]; ++e)
          os << "*" << (k < N_ ? "x" + std::to_string(k + 1) : "y" + std::to_string(k - N_ + 1));
      if (t.ukind == UKind::Linear) os << "*u";
      if (t.ukind == UKind::AbsPow) os << "*abspow(u," << t.q << ")";
    }
    return os.str();
  }

  const std::vector<NlTerm>& terms() const { return terms_; }
  int N() const { return N_; }
  int l() const { return l_; }

 private:
  std::vector<NlTerm> terms_;
  int N_ = 0, l_ = 0;

  static double monomial(const Point& z, const std::array<int, kMaxDim>& expo) {
    double v = 1.0;
    for (size_t k = 0; k < expo.size(); ++k)
      for (int e = 0; e < expo[k]; ++e) v *= z[k];
    return v;
  }

  static double monomial_derivative(const Point& z, const std::array<int, kMaxDim>& expo, int k) {
    double v = static_cast<double>(expo[k]);
    for (size_t kk = 0; kk < expo.size(); ++kk) {
      const int e = (static_cast<int>(kk) == k) ? expo[kk] - 1 : expo[kk];
      for (int i = 0; i < e; ++i) v *= z[kk];
    }
    return v;
  }

  static double g_of_u(const NlTerm& t, double u) {
    switch (t.ukind) {
      case UKind::One: return 1.0;
      case UKind::Linear: return u;
      case UKind::AbsPow: return u == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(u), t.q), u);
    }
    return 0.0;
  }

  static double G_of_u(const NlTerm& t, double u) {
    switch (t.ukind) {
      case UKind::One: return u;
      case UKind::Linear: return 0.5 * u * u;
      case UKind::AbsPow: return std::pow(std::abs(u), t.q + 1.0) / (t.q + 1.0);
    }
    return 0.0;
  }

  static std::vector<NlTerm> canonicalize(detail::TermSum sum) {
    auto key_less = [](const NlTerm& a, const NlTerm& b) {
      if (a.ukind != b.ukind) return a.ukind < b.ukind;
      if (a.q != b.q) return a.q < b.q;
      return a.expo < b.expo;
    };
    std::sort(sum.begin(), sum.end(), key_less);
    std::vector<NlTerm> out;
    for (const auto& t : sum) {
      if (!out.empty() && !key_less(out.back(), t) && !key_less(t, out.back()))
        out.back().coeff += t.coeff;
      else
        out.push_back(t);
    }
    return out;
  }

  // ---- recursive-descent parser -------------------------------------------

  static detail::TermSum parse_expr(detail::Lexer& lex, int N, int l) {
    detail::TermSum total;
    double sign = 1.0;
    if (lex.accept('-')) sign = -1.0;
    else lex.accept('+');
    while (true) {
      detail::TermSum term = parse_term(lex, N, l);
      for (auto& t : term) t.coeff *= sign;
      total.insert(total.end(), term.begin(), term.end());
      if (lex.accept('+')) sign = 1.0;
      else if (lex.accept('-')) sign = -1.0;
      else break;
    }
    return total;
  }

  static detail::TermSum parse_term(detail::Lexer& lex, int N, int l) {
    detail::TermSum prod = parse_factor(lex, N, l);
    while (lex.accept('*')) {
      const size_t pos = lex.pos;
      detail::TermSum rhs = parse_factor(lex, N, l);
      prod = detail::sum_mul(prod, rhs, pos);
    }
    return prod;
  }

  static detail::TermSum parse_factor(detail::Lexer& lex, int N, int l) {
    lex.skip_ws();
    const size_t pos = lex.pos;
    const char c = lex.peek();
    if (c == '(') {
      lex.expect('(');
      detail::TermSum inner = parse_expr(lex, N, l);
      lex.expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      NlTerm t;
      t.coeff = lex.number();
      return {t};
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::string id = lex.identifier();
      if (id == "u") {
        NlTerm t;
        t.coeff = 1.0;
        t.ukind = UKind::Linear;
        return {t};
      }
      if (id == "abspow") {
        lex.expect('(');
        std::string arg = lex.identifier();
        if (arg != "u") throw ParseError("abspow expects 'u' as its first argument", pos);
        lex.expect(',');
        const size_t qpos = lex.pos;
        double q = lex.number();
        lex.expect(')');
        if (!(q > 0.0)) throw ParseError("abspow exponent must be > 0", qpos);
        NlTerm t;
        t.coeff = 1.0;
        t.ukind = UKind::AbsPow;
        t.q = q;
        return {t};
      }
      // coordinate name: x1..xN or y1..yl
      if ((id[0] == 'x' || id[0] == 'y') && id.size() > 1 &&
          std::all_of(id.begin() + 1, id.end(),
                      [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
        const int num = std::atoi(id.c_str() + 1);
        const int count = (id[0] == 'x') ? N : l;
        if (num < 1 || num > count)
          throw ParseError("unknown coordinate name '" + id + "'", pos);
        NlTerm t;
        t.coeff = 1.0;
        t.expo[(id[0] == 'x') ? (num - 1) : (N + num - 1)] = 1;
        return {t};
      }
      throw ParseError("unknown identifier '" + id + "'", pos);
    }
    throw ParseError("expected a factor", pos);
  }
};

// ===========================================================================
// Windowed wrapper for compactly supported forcing
// ===========================================================================

/// C^1 bump W(z) = prod_k (1 - t_k^2)^2 on |t_k| <= 1, t_k = (z_k - c_k)/b_k,
/// zero outside.  Used to localize a nonlinearity to an inner box.
struct Window {
  int dim = 0;
  Point center = make_point();
  Point halfwidth = make_point();

  double value(const Point& z) const {
    double w = 1.0;
    for (int k = 0; k < dim; ++k) {
      const double t = (z[k] - center[k]) / halfwidth[k];
      const double s = 1.0 - t * t;
      if (s <= 0.0) return 0.0;
      w *= s * s;
    }
    return w;
  }

  Point grad(const Point& z) const {
    Point g = make_point();
    std::array<double, kMaxDim> s{};
    for (int k = 0; k < dim; ++k) {
      const double t = (z[k] - center[k]) / halfwidth[k];
      s[k] = 1.0 - t * t;
      if (s[k] <= 0.0) return make_point();
    }
    for (int k = 0; k < dim; ++k) {
      const double t = (z[k] - center[k]) / halfwidth[k];
      double d = -4.0 * t * s[k] / halfwidth[k];
      for (int kk = 0; kk < dim; ++kk)
        if (kk != k) d *= s[kk] * s[kk];
      g[k] = d;
    }
    return g;
  }
};

/// Nonlinearity localized by a window: f~ = W f, F~ = W F,
/// grad_z F~ = F grad W + W grad_z F.  Same evaluation interface as
/// Nonlinearity so the solver and identity assemblers accept either.
class WindowedNonlinearity {
 public:
  WindowedNonlinearity(Nonlinearity base, Window w) : base_(std::move(base)), w_(w) {}

  double f(const Point& z, double u) const { return w_.value(z) * base_.f(z, u); }
  double F(const Point& z, double u) const { return w_.value(z) * base_.F(z, u); }

  Point dF_dz(const Point& z, double u) const {
    Point out = w_.grad(z);
    const double Fv = base_.F(z, u);
    const double Wv = w_.value(z);
    const Point dB = base_.dF_dz(z, u);
    for (int k = 0; k < w_.dim; ++k) out[k] = out[k] * Fv + Wv * dB[k];
    return out;
  }

  bool depends_on_u() const { return base_.depends_on_u(); }

 private:
  Nonlinearity base_;
  Window w_;
};

}  // namespace grushin

#endif  // GRUSHIN_NONLINEARITY_HPP

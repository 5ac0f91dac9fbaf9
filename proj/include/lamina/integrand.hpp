#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "lamina/error.hpp"
#include "lamina/laminate.hpp"
#include "lamina/matrix.hpp"
#include "lamina/util.hpp"

namespace lamina {

// Closed bank of energy densities. Keeping the bank closed (no user-supplied
// code) makes every energy evaluation serializable and reproducible.
//
//   pnorm:<p>               |A|^p
//   det                     det A
//   negdetq:<q>             |det A|^q restricted to det A < 0, else 0
//   composite:<c1>:<p>:<c2> c1 |A|^p + c2 * g(det A), g(t) = max(0, -t)^2
class Integrand {
 public:
  enum class Kind { PNorm, Det, NegDetQ, Composite };

  static Integrand parse(std::string_view spec) {
    Integrand f;
    auto next_field = [&spec]() -> std::string_view {
      size_t pos = spec.find(':');
      std::string_view head = spec.substr(0, pos);
      spec = (pos == std::string_view::npos) ? std::string_view{} : spec.substr(pos + 1);
      return head;
    };
    auto to_real = [](std::string_view s) {
      try {
        size_t used = 0;
        double v = std::stod(std::string(s), &used);
        if (used != s.size()) fail(ErrorCode::UnknownIntegrand, "bad numeric field");
        return v;
      } catch (const Error&) {
        throw;
      } catch (...) {
        fail(ErrorCode::UnknownIntegrand, "bad numeric field in integrand spec");
      }
    };

    std::string_view head = next_field();
    if (head == "pnorm") {
      f.kind_ = Kind::PNorm;
      f.p_ = to_real(next_field());
      if (f.p_ < 1.0) fail(ErrorCode::UnknownIntegrand, "pnorm requires p >= 1");
    } else if (head == "det") {
      f.kind_ = Kind::Det;
    } else if (head == "negdetq") {
      f.kind_ = Kind::NegDetQ;
      f.q_ = to_real(next_field());
      if (f.q_ <= 0.0) fail(ErrorCode::UnknownIntegrand, "negdetq requires q > 0");
    } else if (head == "composite") {
      f.kind_ = Kind::Composite;
      f.c1_ = to_real(next_field());
      f.p_ = to_real(next_field());
      f.c2_ = to_real(next_field());
      if (f.p_ < 1.0) fail(ErrorCode::UnknownIntegrand, "composite requires p >= 1");
    } else {
      fail(ErrorCode::UnknownIntegrand, "unknown integrand '" + std::string(head) + "'");
    }
    if (!spec.empty()) fail(ErrorCode::UnknownIntegrand, "trailing integrand fields");
    return f;
  }

  double operator()(const Mat& a) const {
    switch (kind_) {
      case Kind::PNorm:
        return std::pow(frobenius_norm(a), p_);
      case Kind::Det:
        return determinant(a);
      case Kind::NegDetQ: {
        double det = determinant(a);
        return det < 0.0 ? std::pow(-det, q_) : 0.0;
      }
      case Kind::Composite: {
        double det = determinant(a);
        double neg = det < 0.0 ? -det : 0.0;
        return c1_ * std::pow(frobenius_norm(a), p_) + c2_ * neg * neg;
      }
    }
    return 0.0;
  }

  Kind kind() const { return kind_; }
  double growth_exponent() const {
    switch (kind_) {
      case Kind::PNorm: return p_;
      case Kind::Det: return 0.0;
      case Kind::NegDetQ: return 0.0;
      case Kind::Composite: return p_;
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind_) {
      case Kind::PNorm: return "pnorm:" + format_double(p_);
      case Kind::Det: return "det";
      case Kind::NegDetQ: return "negdetq:" + format_double(q_);
      case Kind::Composite:
        return "composite:" + format_double(c1_) + ":" + format_double(p_) +
               ":" + format_double(c2_);
    }
    return "?";
  }

 private:
  Kind kind_ = Kind::Det;
  double p_ = 2.0;
  double q_ = 1.0;
  double c1_ = 1.0;
  double c2_ = 1.0;
};

// Measure-level energy: sum of w_k f(M_k).
inline double energy(const Laminate& lam, const Integrand& f) {
  std::vector<double> terms;
  lam.for_each_atom([&](double w, const Mat& m, int) { terms.push_back(w * f(m)); });
  return pairwise_sum(terms);
}

inline double energy(const Laminate& lam, std::string_view integrand_spec) {
  return energy(lam, Integrand::parse(integrand_spec));
}

}  // namespace lamina

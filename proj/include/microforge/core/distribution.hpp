#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "microforge/core/random.hpp"

namespace microforge {

/// Positive scalar distribution for grain and sphere sizes.
///
/// The lognormal variant is truncated at `upper`; an untruncated lognormal
/// has unbounded support and is rejected by validate().
struct SizeDistribution {
    enum class Kind { constant, uniform, lognormal };

    Kind kind = Kind::constant;
    double a = 1.0;  // constant value | uniform lower bound | lognormal mu (of log)
    double b = 1.0;  // uniform upper bound | lognormal sigma (of log)
    double upper = std::numeric_limits<double>::infinity();  // lognormal truncation

    static SizeDistribution constant(double v) { return {Kind::constant, v, v, v}; }
    static SizeDistribution uniform(double lo, double hi) { return {Kind::uniform, lo, hi, hi}; }
    static SizeDistribution lognormal(double mu, double sigma, double max_value) {
        return {Kind::lognormal, mu, sigma, max_value};
    }

    void validate(const std::string& what) const {
        switch (kind) {
            case Kind::constant:
                if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument(what + ": constant size must be > 0");
                break;
            case Kind::uniform:
                if (!(a > 0.0) || !(b >= a) || !std::isfinite(b))
                    throw std::invalid_argument(what + ": uniform sizes need 0 < min <= max < inf");
                break;
            case Kind::lognormal:
                if (!(b >= 0.0) || !std::isfinite(a)) throw std::invalid_argument(what + ": lognormal needs sigma >= 0");
                if (!std::isfinite(upper))
                    throw std::invalid_argument(what + ": lognormal size distribution is unbounded; set a truncation maximum");
                if (!(upper > 0.0)) throw std::invalid_argument(what + ": lognormal truncation must be > 0");
                break;
        }
    }

    double max_value() const {
        switch (kind) {
            case Kind::constant: return a;
            case Kind::uniform: return b;
            case Kind::lognormal: return upper;
        }
        return upper;
    }

    double sample(RandomStream& rng) const {
        switch (kind) {
            case Kind::constant: return a;
            case Kind::uniform: return rng.uniform(a, b);
            case Kind::lognormal:
                for (;;) {
                    const double v = std::exp(a + b * rng.normal());
                    if (v <= upper) return v;
                }
        }
        return a;
    }

    /// E[X^k] in closed form (truncated lognormal via normal CDF ratios).
    double moment(int k) const {
        switch (kind) {
            case Kind::constant: return std::pow(a, k);
            case Kind::uniform:
                if (b == a) return std::pow(a, k);
                return (std::pow(b, k + 1) - std::pow(a, k + 1)) / ((k + 1) * (b - a));
            case Kind::lognormal: {
                const auto phi = [](double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); };
                if (b == 0.0) return std::pow(std::min(std::exp(a), upper), k);
                const double lm = std::log(upper);
                return std::exp(k * a + 0.5 * k * k * b * b) * phi((lm - a - k * b * b) / b) / phi((lm - a) / b);
            }
        }
        return 0.0;
    }
};

}  // namespace microforge

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "json.hpp"

#include "microforge/core/random.hpp"

namespace microforge {

/// Distribution of gray values (volume units, nominally [0, 1]).
struct GrayModel {
    enum class Kind { gaussian, empirical };

    Kind kind = Kind::gaussian;
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> bin_edges;  // empirical: size = weights.size() + 1, increasing
    std::vector<double> weights;    // empirical: non-negative, positive sum

    static GrayModel gaussian(double mean, double stddev) {
        GrayModel m;
        m.kind = Kind::gaussian;
        m.mean = mean;
        m.stddev = stddev;
        m.validate();
        return m;
    }

    void validate() const {
        if (!std::isfinite(mean) || !(stddev >= 0.0)) throw std::invalid_argument("gray model needs stddev >= 0");
        if (kind == Kind::empirical) {
            if (weights.empty() || bin_edges.size() != weights.size() + 1)
                throw std::invalid_argument("empirical gray model needs bins+1 edges");
            double total = 0.0;
            for (double w : weights) {
                if (!(w >= 0.0)) throw std::invalid_argument("gray histogram weights must be >= 0");
                total += w;
            }
            if (!(total > 0.0)) throw std::invalid_argument("gray histogram must have positive mass");
            for (std::size_t i = 1; i < bin_edges.size(); ++i)
                if (!(bin_edges[i] >= bin_edges[i - 1])) throw std::invalid_argument("bin edges must increase");
        }
    }

    double sample(RandomStream& rng) const {
        if (kind == Kind::gaussian) return mean + stddev * rng.normal();
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        double u = rng.uniform() * total;
        std::size_t bin = 0;
        while (bin + 1 < weights.size() && u >= weights[bin]) {
            u -= weights[bin];
            ++bin;
        }
        return rng.uniform(bin_edges[bin], bin_edges[bin + 1]);
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"kind", kind == Kind::gaussian ? "gaussian" : "empirical"}, {"mean", mean}, {"stddev", stddev}};
        if (kind == Kind::empirical) {
            j["bin_edges"] = bin_edges;
            j["weights"] = weights;
        }
        return j;
    }
};

}  // namespace microforge

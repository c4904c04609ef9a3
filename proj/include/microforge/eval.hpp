#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "microforge/core/distance.hpp"
#include "microforge/core/geometry.hpp"
#include "microforge/core/volume.hpp"

namespace microforge {

struct SegScores {
    double dice = 1.0;
    double precision = 1.0;
    double recall = 1.0;
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Overlap scores of `seg` against `truth`. Empty against empty scores 1;
/// precision (recall) is 1 when nothing is predicted (present).
inline SegScores dice(const LabelMask& seg, const LabelMask& truth) {
    require_same_dims(seg, truth, "dice");
    SegScores s;
    for (std::size_t i = 0; i < seg.size(); ++i) {
        const bool a = seg[i] != 0, b = truth[i] != 0;
        if (a && b)
            ++s.tp;
        else if (a)
            ++s.fp;
        else if (b)
            ++s.fn;
        else
            ++s.tn;
    }
    const double tp = static_cast<double>(s.tp);
    const double denom = 2.0 * tp + static_cast<double>(s.fp + s.fn);
    s.dice = denom > 0.0 ? 2.0 * tp / denom : 1.0;
    s.precision = s.tp + s.fp > 0 ? tp / static_cast<double>(s.tp + s.fp) : 1.0;
    s.recall = s.tp + s.fn > 0 ? tp / static_cast<double>(s.tp + s.fn) : 1.0;
    return s;
}

struct ThicknessStats {
    std::vector<std::uint64_t> histogram;  // bin k counts thickness in [k, k + 1)
    std::map<double, std::uint64_t> values;  // count per distinct thickness
    std::uint64_t samples = 0;
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;

    /// Bin with the highest count in [lo, hi], lowest bin on ties.
    std::size_t mode_in(std::size_t lo, std::size_t hi) const {
        hi = std::min(hi, histogram.size() - 1);
        std::size_t best = lo;
        for (std::size_t k = lo; k <= hi; ++k)
            if (histogram[k] > histogram[best]) best = k;
        return best;
    }

    /// Most frequent distinct thickness in [lo, hi] (smallest on ties), NaN if none.
    double mode_value_in(double lo, double hi) const {
        double best = std::numeric_limits<double>::quiet_NaN();
        std::uint64_t n = 0;
        for (auto it = values.lower_bound(lo); it != values.end() && it->first <= hi; ++it)
            if (it->second > n) {
                n = it->second;
                best = it->first;
            }
        return best;
    }
};

/// Local thickness sampled on medial voxels. With d the Euclidean distance
/// from a mask voxel centre to the nearest background voxel centre, a voxel
/// is medial when no 26-neighbour has a larger d, and its thickness is
/// 2d - 1 (one voxel for a single-voxel sheet).
inline ThicknessStats thickness_stats(const LabelMask& mask) {
    if (count_foreground(mask) == 0) throw std::invalid_argument("thickness of an empty mask is undefined");
    LabelMask background(mask.dims(), mask.spacing());
    bool any_background = false;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (!mask[i]) {
            background[i] = 1;
            any_background = true;
        }
    if (!any_background) throw std::invalid_argument("thickness needs at least one background voxel");
    const Volume<float> d2 = squared_distance_to(background);
    const Dims d = mask.dims();
    ThicknessStats st;
    st.min = std::numeric_limits<double>::infinity();
    st.max = 0.0;
    double sum = 0.0;
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) {
                const std::size_t i = mask.index(x, y, z);
                if (!mask[i]) continue;
                const float c = d2[i];
                bool medial = true;
                for (std::int64_t dz = -1; dz <= 1 && medial; ++dz)
                    for (std::int64_t dy = -1; dy <= 1 && medial; ++dy)
                        for (std::int64_t dx = -1; dx <= 1 && medial; ++dx)
                            if (mask.in_bounds(x + dx, y + dy, z + dz) && d2(x + dx, y + dy, z + dz) > c) medial = false;
                if (!medial) continue;
                const double t = 2.0 * std::sqrt(static_cast<double>(c)) - 1.0;
                const auto bin = static_cast<std::size_t>(t);
                if (st.histogram.size() <= bin) st.histogram.resize(bin + 1, 0);
                ++st.histogram[bin];
                ++st.values[t];
                ++st.samples;
                sum += t;
                st.min = std::min(st.min, t);
                st.max = std::max(st.max, t);
            }
    st.mean = sum / static_cast<double>(st.samples);
    return st;
}

struct SeparationReport {
    bool separated = false;
    std::uint64_t reached = 0;   // non-mask voxels 6-connected to the low face
    std::uint64_t blocking = 0;  // mask voxels 6-adjacent to the reached set
    std::optional<std::array<std::int64_t, 3>> witness;  // reached voxel on the high face
};

/// Flood fill of non-mask voxels (6-connectivity) from the low face along
/// `axis`; separated when the fill does not reach the high face.
inline SeparationReport separation_check(const LabelMask& mask, Axis axis) {
    const Dims d = mask.dims();
    if (!d.valid()) throw std::invalid_argument("separation check needs a non-empty volume");
    const int a = static_cast<int>(axis);
    std::vector<char> seen(mask.size(), 0), blocked(mask.size(), 0);
    std::vector<std::size_t> stack;
    for (std::int64_t z = 0; z < d.nz; ++z)
        for (std::int64_t y = 0; y < d.ny; ++y)
            for (std::int64_t x = 0; x < d.nx; ++x) {
                const std::int64_t c[3] = {x, y, z};
                if (c[a] != 0) continue;
                const std::size_t i = mask.index(x, y, z);
                if (mask[i]) {
                    blocked[i] = 1;
                    continue;
                }
                seen[i] = 1;
                stack.push_back(i);
            }
    SeparationReport r;
    while (!stack.empty()) {
        const std::size_t i = stack.back();
        stack.pop_back();
        ++r.reached;
        const std::int64_t c[3] = {static_cast<std::int64_t>(i % d.nx), static_cast<std::int64_t>((i / d.nx) % d.ny),
                                   static_cast<std::int64_t>(i / (d.nx * d.ny))};
        if (c[a] == d[a] - 1 && !r.witness) r.witness = std::array<std::int64_t, 3>{c[0], c[1], c[2]};
        for (int ax = 0; ax < 3; ++ax)
            for (int s = -1; s <= 1; s += 2) {
                std::int64_t q[3] = {c[0], c[1], c[2]};
                q[ax] += s;
                if (!mask.in_bounds(q[0], q[1], q[2])) continue;
                const std::size_t j = mask.index(q[0], q[1], q[2]);
                if (mask[j]) {
                    blocked[j] = 1;
                } else if (!seen[j]) {
                    seen[j] = 1;
                    stack.push_back(j);
                }
            }
    }
    for (char b : blocked) r.blocking += b ? 1 : 0;
    r.separated = !r.witness.has_value();
    return r;
}

}  // namespace microforge

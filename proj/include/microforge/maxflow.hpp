#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

namespace microforge {

/// Dinic's blocking-flow max-flow on real capacities.
///
/// Residual capacities at or below `eps` count as saturated; eps is set
/// relative to the largest finite capacity when solve() runs. Infinite
/// capacities are replaced by a bound larger than any finite cut, and
/// solve() reports +inf when that bound is reached.
class MaxFlow {
public:
    explicit MaxFlow(int num_nodes) : adj_(static_cast<std::size_t>(num_nodes)) {}

    /// Add u->v with capacity `cap` and v->u with capacity `rev_cap`.
    void add_edge(int u, int v, double cap, double rev_cap = 0.0) {
        if (cap < 0.0 || rev_cap < 0.0) throw std::invalid_argument("negative capacity");
        adj_[u].push_back({v, static_cast<int>(adj_[v].size()), cap});
        adj_[v].push_back({u, static_cast<int>(adj_[u].size()) - 1, rev_cap});
    }

    double solve(int s, int t) {
        double finite_total = 0.0, finite_max = 0.0;
        for (auto& arcs : adj_)
            for (auto& a : arcs)
                if (std::isfinite(a.cap)) {
                    finite_total += a.cap;
                    finite_max = std::max(finite_max, a.cap);
                }
        const double big = 2.0 * finite_total + 1.0;
        for (auto& arcs : adj_)
            for (auto& a : arcs)
                if (!std::isfinite(a.cap)) a.cap = big;
        eps_ = 1e-12 * std::max(finite_max, 1e-300);

        double flow = 0.0;
        level_.assign(adj_.size(), -1);
        iter_.assign(adj_.size(), 0);
        while (bfs(s, t)) {
            std::fill(iter_.begin(), iter_.end(), 0);
            for (;;) {
                const double f = dfs(s, t, std::numeric_limits<double>::infinity());
                if (f <= eps_) break;
                flow += f;
            }
            if (flow >= big) return std::numeric_limits<double>::infinity();
        }
        source_ = s;
        return flow >= big ? std::numeric_limits<double>::infinity() : flow;
    }

    /// Nodes reachable from the source in the final residual graph.
    std::vector<char> source_side() const {
        std::vector<char> seen(adj_.size(), 0);
        std::vector<int> stack{source_};
        seen[source_] = 1;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (const auto& a : adj_[u])
                if (a.cap > eps_ && !seen[a.to]) {
                    seen[a.to] = 1;
                    stack.push_back(a.to);
                }
        }
        return seen;
    }

private:
    struct Arc {
        int to;
        int rev;
        double cap;
    };

    bool bfs(int s, int t) {
        std::fill(level_.begin(), level_.end(), -1);
        std::queue<int> q;
        level_[s] = 0;
        q.push(s);
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            for (const auto& a : adj_[u])
                if (a.cap > eps_ && level_[a.to] < 0) {
                    level_[a.to] = level_[u] + 1;
                    q.push(a.to);
                }
        }
        return level_[t] >= 0;
    }

    double dfs(int u, int t, double pushed) {
        if (u == t) return pushed;
        for (std::size_t& i = iter_[u]; i < adj_[u].size(); ++i) {
            Arc& a = adj_[u][i];
            if (a.cap <= eps_ || level_[a.to] != level_[u] + 1) continue;
            const double d = dfs(a.to, t, std::min(pushed, a.cap));
            if (d > eps_) {
                a.cap -= d;
                adj_[a.to][a.rev].cap += d;
                return d;
            }
        }
        return 0.0;
    }

    std::vector<std::vector<Arc>> adj_;
    std::vector<int> level_;
    std::vector<std::size_t> iter_;
    double eps_ = 0.0;
    int source_ = 0;
};

}  // namespace microforge

#include "pnnl/sampling.hpp"

#include "pnnl/errors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace pnnl {

namespace {

// Higher loss first, lower index on ties: a strict total order.
struct LossOrder {
    std::span<const double> losses;
    bool operator()(std::size_t a, std::size_t b) const noexcept {
        if (losses[a] != losses[b]) return losses[a] > losses[b];
        return a < b;
    }
};

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        d += diff * diff;
    }
    return d;
}

// Nearest centroid per point (lowest index on ties); returns the objective.
double assign_points(const Matrix& points, const Matrix& centroids, std::vector<std::size_t>& assignments) {
    double objective = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.rows(); ++c) {
            const double d = squared_distance(points.row(i), centroids.row(c));
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        assignments[i] = best;
        objective += best_d;
    }
    return objective;
}

Matrix seed_plus_plus(const Matrix& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.rows();
    Matrix centroids(k, points.cols());
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::size_t chosen = rng.below(n);
    for (std::size_t c = 0; c < k; ++c) {
        if (c > 0) {
            double total = 0.0;
            for (double d : nearest) total += d;
            if (total > 0.0) {
                const double target = rng.uniform() * total;
                double running = 0.0;
                chosen = n;
                std::size_t last_positive = 0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (nearest[i] <= 0.0) continue;
                    last_positive = i;
                    running += nearest[i];
                    if (running > target) {
                        chosen = i;
                        break;
                    }
                }
                if (chosen == n) chosen = last_positive;
            } else {
                // Every point coincides with a chosen center.
                chosen = rng.below(n);
            }
        }
        std::copy(points.row(chosen).begin(), points.row(chosen).end(), centroids.row(c).begin());
        for (std::size_t i = 0; i < n; ++i)
            nearest[i] = std::min(nearest[i], squared_distance(points.row(i), centroids.row(c)));
    }
    return centroids;
}

}  // namespace

Subset select_random(std::size_t n_train, std::size_t m, Rng rng) {
    if (m == 0) throw ConfigError("subset size M must be at least 1");
    Subset out;
    if (m >= n_train) {
        out.indices.resize(n_train);
        std::iota(out.indices.begin(), out.indices.end(), 0);
        return out;
    }
    std::vector<std::size_t> pool(n_train);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + rng.below(n_train - i);
        std::swap(pool[i], pool[j]);
    }
    out.indices.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

SelectionContext compute_context(const Topology& topology, const Matrix& features,
                                 std::span<const std::uint32_t> labels, Rng rng, std::size_t num_clusters,
                                 Representation representation) {
    const Forward f = forward(topology, features);
    SelectionContext ctx;
    ctx.per_sample_loss = softmax_cross_entropy(f.logits, labels).per_sample;
    ctx.representations = representation == Representation::probabilities ? f.probabilities : f.logits;
    ctx.rng = rng;
    ctx.num_clusters = num_clusters;
    return ctx;
}

Subset select_top_loss(std::span<const double> losses, std::size_t m) {
    if (m == 0) throw ConfigError("subset size M must be at least 1");
    std::vector<std::size_t> order(losses.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t take = std::min(m, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      LossOrder{losses});
    Subset out;
    out.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

KMeansResult kmeans(const Matrix& points, std::size_t num_clusters, Rng rng, std::size_t max_iters) {
    const std::size_t n = points.rows();
    if (num_clusters == 0) throw ConfigError("kmeans needs at least one cluster");
    if (n < num_clusters)
        throw ConfigError("kmeans: " + std::to_string(n) + " points cannot form " + std::to_string(num_clusters) +
                          " clusters");

    KMeansResult r;
    r.centroids = seed_plus_plus(points, num_clusters, rng);
    r.assignments.assign(n, 0);
    r.objective_history.push_back(assign_points(points, r.centroids, r.assignments));

    std::vector<std::size_t> next(n, 0);
    std::vector<std::size_t> counts(num_clusters);
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        // Update step: means of the current members.
        Matrix sums(num_clusters, points.cols());
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto s = sums.row(r.assignments[i]);
            const auto p = points.row(i);
            for (std::size_t j = 0; j < s.size(); ++j) s[j] += p[j];
            ++counts[r.assignments[i]];
        }
        for (std::size_t c = 0; c < num_clusters; ++c) {
            if (counts[c] == 0) continue;
            auto dst = r.centroids.row(c);
            const auto s = sums.row(c);
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = s[j] / static_cast<double>(counts[c]);
        }
        std::vector<bool> used(n, false);
        for (std::size_t c = 0; c < num_clusters; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (used[i]) continue;
                const double d = squared_distance(points.row(i), r.centroids.row(r.assignments[i]));
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            used[far] = true;
            std::copy(points.row(far).begin(), points.row(far).end(), r.centroids.row(c).begin());
        }

        r.objective_history.push_back(assign_points(points, r.centroids, next));
        ++r.iterations;
        if (next == r.assignments) {
            r.converged = true;
            break;
        }
        r.assignments.swap(next);
    }
    return r;
}

ClusterSelection select_cluster_top_loss_detailed(const SelectionContext& ctx, std::size_t m) {
    const std::size_t n = ctx.per_sample_loss.size();
    if (ctx.representations.rows() != n) throw DimensionError("context losses and representations differ in size");
    if (ctx.num_clusters == 0) throw ConfigError("cluster strategy needs at least one cluster");
    if (m < ctx.num_clusters)
        throw ConfigError("subset size M=" + std::to_string(m) + " is smaller than the cluster count C=" +
                          std::to_string(ctx.num_clusters));

    ClusterSelection out;
    const std::size_t clusters = std::min(ctx.num_clusters, n);
    out.clustering = kmeans(ctx.representations, clusters, ctx.rng);
    out.per_cluster_quota = m / ctx.num_clusters;

    const LossOrder order{ctx.per_sample_loss};
    std::vector<std::vector<std::size_t>> members(clusters);
    for (std::size_t i = 0; i < n; ++i) members[out.clustering.assignments[i]].push_back(i);

    std::vector<bool> selected(n, false);
    out.taken_per_cluster.assign(clusters, 0);
    for (std::size_t c = 0; c < clusters; ++c) {
        auto& group = members[c];
        const std::size_t take = std::min(out.per_cluster_quota, group.size());
        std::partial_sort(group.begin(), group.begin() + static_cast<std::ptrdiff_t>(take), group.end(), order);
        for (std::size_t j = 0; j < take; ++j) selected[group[j]] = true;
        out.taken_per_cluster[c] = take;
    }

    const std::size_t target = std::min(m, n);
    std::size_t have = std::accumulate(out.taken_per_cluster.begin(), out.taken_per_cluster.end(), std::size_t{0});
    if (have < target) {
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < n; ++i)
            if (!selected[i]) rest.push_back(i);
        const std::size_t fill = target - have;
        std::partial_sort(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(fill), rest.end(), order);
        for (std::size_t j = 0; j < fill; ++j) selected[rest[j]] = true;
        out.filled = fill;
        have += fill;
    }
    for (std::size_t i = 0; i < n; ++i)
        if (selected[i]) out.subset.indices.push_back(i);
    return out;
}

void UniqueTracker::track(const Subset& subset) {
    for (std::size_t i : subset.indices) {
        if (i >= seen_.size()) throw DimensionError("subset index outside the training split");
        if (!seen_[i]) {
            seen_[i] = true;
            ++unique_;
        }
    }
    per_step_.push_back(unique_);
}

}  // namespace pnnl

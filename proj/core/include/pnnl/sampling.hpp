#pragma once

#include "pnnl/network.hpp"
#include "pnnl/numerics.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace pnnl {

// Indices into the training split chosen for one progression step.
struct Subset {
    std::vector<std::size_t> indices;   // sorted, unique
    std::size_t step = 0;

    std::size_t size() const noexcept { return indices.size(); }
    friend bool operator==(const Subset&, const Subset&) = default;
};

enum class Representation { probabilities, logits };

// What the loss-driven strategies know about f_{k-1} on the training split.
struct SelectionContext {
    std::vector<double> per_sample_loss;
    Matrix representations;        // N_train x K
    Rng rng;
    std::size_t num_clusters = 1;
};

// Uniform M-subset via partial Fisher–Yates over [0, n_train).
Subset select_random(std::size_t n_train, std::size_t m, Rng rng);

// One forward pass of `topology` over the training rows.
SelectionContext compute_context(const Topology& topology, const Matrix& features,
                                 std::span<const std::uint32_t> labels, Rng rng, std::size_t num_clusters,
                                 Representation representation = Representation::probabilities);

// The M highest losses; ties resolve to the lower index.
Subset select_top_loss(std::span<const double> losses, std::size_t m);
inline Subset select_top_loss(const SelectionContext& ctx, std::size_t m) {
    return select_top_loss(ctx.per_sample_loss, m);
}

struct KMeansResult {
    std::vector<std::size_t> assignments;
    Matrix centroids;
    // Within-cluster sum of squares after every assignment pass.
    std::vector<double> objective_history;
    std::size_t iterations = 0;
    bool converged = false;
};

// k-means++ seeding then Lloyd iterations until assignments stop changing
// or `max_iters` updates have run. A cluster left empty is re-seeded at the
// point farthest from its own centroid.
KMeansResult kmeans(const Matrix& points, std::size_t num_clusters, Rng rng, std::size_t max_iters = 100);

struct ClusterSelection {
    Subset subset;
    KMeansResult clustering;
    std::size_t per_cluster_quota = 0;            // m = floor(M / C)
    std::vector<std::size_t> taken_per_cluster;   // before the remainder fill
    std::size_t filled = 0;                       // remainder taken by global loss
};

// Cluster the representations, take the top floor(M/C) losses of each
// cluster, then fill up to M with the globally highest remaining losses.
ClusterSelection select_cluster_top_loss_detailed(const SelectionContext& ctx, std::size_t m);
inline Subset select_cluster_top_loss(const SelectionContext& ctx, std::size_t m) {
    return select_cluster_top_loss_detailed(ctx, m).subset;
}

// Running union of the selected subsets.
class UniqueTracker {
public:
    explicit UniqueTracker(std::size_t n_train) : seen_(n_train, false) {}

    void track(const Subset& subset);
    std::size_t unique_count() const noexcept { return unique_; }
    const std::vector<std::size_t>& per_step_counts() const noexcept { return per_step_; }

private:
    std::vector<bool> seen_;
    std::size_t unique_ = 0;
    std::vector<std::size_t> per_step_;
};

}  // namespace pnnl

#pragma once

#include <span>
#include <vector>

namespace dhtm {

// Sparse distributed representation: a fixed-dimension binary vector stored
// as the sorted list of its active indices. Downstream code iterates active
// bits only; typical sparsity is 1-10%.
struct Sdr {
    int dimension = 0;
    std::vector<int> active;  // strictly increasing, each in [0, dimension)

    Sdr() = default;
    Sdr(int dimension, std::vector<int> active_indices);

    std::size_t size() const { return active.size(); }
    bool contains(int index) const;
    bool operator==(const Sdr&) const = default;
};

// k-winners-take-all: indices of the min(k, len) highest scores.
// Ties break toward the lower index so runs are reproducible.
Sdr kwta(std::span<const double> scores, int k);

// Grouped variant: scores are split into `block_count` contiguous equal
// blocks and `winners_per_block` are selected independently in each one.
Sdr kwta_blocks(std::span<const double> scores, int block_count, int winners_per_block);

// Number of shared active bits. Dimensions must match.
int overlap(const Sdr& a, const Sdr& b);

}  // namespace dhtm

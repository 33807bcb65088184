#include "dhtm/sdr.hpp"

#include <algorithm>
#include <numeric>

#include "dhtm/check.hpp"

namespace dhtm {

Sdr::Sdr(int dim, std::vector<int> active_indices)
    : dimension(dim), active(std::move(active_indices)) {
    check_arg(dimension >= 0, "Sdr: negative dimension");
    std::sort(active.begin(), active.end());
    for (std::size_t i = 0; i < active.size(); ++i) {
        check_arg(active[i] >= 0 && active[i] < dimension, "Sdr: index out of range");
        check_arg(i == 0 || active[i] != active[i - 1], "Sdr: duplicate index");
    }
}

bool Sdr::contains(int index) const {
    return std::binary_search(active.begin(), active.end(), index);
}

Sdr kwta(std::span<const double> scores, int k) {
    check_arg(!scores.empty(), "kwta: empty scores");
    check_arg(k >= 1, "kwta: k must be positive");
    const int n = static_cast<int>(scores.size());
    const int take = std::min(k, n);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto better = [&scores](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;  // lowest index wins ties
    };
    std::nth_element(order.begin(), order.begin() + take - 1, order.end(), better);
    order.resize(take);
    std::sort(order.begin(), order.end());
    Sdr out;
    out.dimension = n;
    out.active = std::move(order);
    return out;
}

Sdr kwta_blocks(std::span<const double> scores, int block_count, int winners_per_block) {
    check_arg(block_count >= 1, "kwta_blocks: block_count must be positive");
    check_arg(!scores.empty(), "kwta_blocks: empty scores");
    check_arg(scores.size() % block_count == 0, "kwta_blocks: blocks must divide size");
    const int block = static_cast<int>(scores.size()) / block_count;
    Sdr out;
    out.dimension = static_cast<int>(scores.size());
    for (int b = 0; b < block_count; ++b) {
        Sdr local = kwta(scores.subspan(static_cast<std::size_t>(b) * block, block),
                         winners_per_block);
        for (int idx : local.active) out.active.push_back(b * block + idx);
    }
    return out;
}

int overlap(const Sdr& a, const Sdr& b) {
    check_arg(a.dimension == b.dimension, "overlap: dimension mismatch");
    int count = 0;
    auto ia = a.active.begin();
    auto ib = b.active.begin();
    while (ia != a.active.end() && ib != b.active.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++count;
            ++ia;
            ++ib;
        }
    }
    return count;
}

}  // namespace dhtm

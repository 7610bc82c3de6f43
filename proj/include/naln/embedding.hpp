#pragma once

#include <vector>

#include "naln/tensor.hpp"

namespace naln {

// n×d embedding matrix with one unique id per row. `normalized` marks sets
// whose rows were L2-normalized (unit norm within 1e-9).
struct EmbeddingSet {
    Tensor vectors;        // n×d
    std::vector<int> ids;  // length n, unique
    bool normalized = false;

    std::size_t count() const { return ids.size(); }
    std::size_t dim() const { return vectors.rank() == 2 ? vectors.dim(1) : 0; }

    void validate() const;  // shape/id/finiteness invariants
};

}  // namespace naln

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "naln/embedding.hpp"
#include "naln/tensor.hpp"

namespace naln {

// Immutable database of L2-normalized image embeddings, rows in ascending id
// order so that similarity ties resolve to the lower id.
struct Index {
    Tensor vectors;  // n x d, unit rows
    std::vector<int> ids;

    std::size_t size() const { return ids.size(); }
    std::size_t dim() const { return vectors.dim(1); }
};

struct RetrievalReport {
    std::vector<std::vector<int>> ranked_ids;  // per query, truncated to max k
    std::vector<std::size_t> ks;
    std::vector<std::size_t> hit_counts;  // aligned with ks
    std::vector<double> accuracy;         // hit_counts / query_count
    std::size_t database_size = 0;
    std::size_t query_count = 0;
};

Index build_index(const EmbeddingSet& images);

// Full ordering of database ids by descending cosine similarity to the query.
std::vector<int> rank(const Index& index, const Tensor& query);

RetrievalReport topk_accuracy(const Index& index, const EmbeddingSet& queries,
                              const std::vector<int>& true_ids, const std::vector<std::size_t>& ks);

// Same scoring contract against a database enlarged with extra distractors.
RetrievalReport extended_search(const Index& enlarged, const EmbeddingSet& queries,
                                const std::vector<int>& true_ids, const std::vector<std::size_t>& ks);

// Concatenation with distinct-id enforcement, for train+test search spaces.
EmbeddingSet merge_embedding_sets(const EmbeddingSet& a, const EmbeddingSet& b);

std::string report_to_text(const RetrievalReport& report);

}  // namespace naln

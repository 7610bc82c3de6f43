#include "naln/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include "naln/errors.hpp"
#include "naln/parallel.hpp"

namespace naln {

namespace {

void check_query_dim(const Index& index, std::size_t got) {
    if (got != index.dim())
        throw ShapeError("query dimension " + std::to_string(got) + " does not match index dimension " +
                         std::to_string(index.dim()));
}

// similarity of a unit query against every database row
void similarities(const Index& index, const double* unit_query, std::vector<double>& out) {
    const std::size_t n = index.size(), d = index.dim();
    const double* rows = index.vectors.data().data();
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = rows + i * d;
        double acc = 0.0;
        for (std::size_t k = 0; k < d; ++k) acc += row[k] * unit_query[k];
        out[i] = acc;
    }
}

std::vector<double> normalize_query(const Tensor& query) {
    if (query.rank() != 1) throw ShapeError("query must be a vector, got " + dims_to_string(query.dims()));
    const auto& q = query.data();
    double norm = 0.0;
    for (double x : q) norm += x * x;
    norm = std::sqrt(norm);
    if (!(norm > 1e-150)) throw DegenerateInputError("query has zero norm");
    std::vector<double> unit(q.size());
    for (std::size_t k = 0; k < q.size(); ++k) unit[k] = q[k] / norm;
    return unit;
}

}  // namespace

Index build_index(const EmbeddingSet& images) {
    images.validate();
    const std::size_t n = images.count(), d = images.dim();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return images.ids[a] < images.ids[b]; });

    Index index;
    index.vectors = Tensor::zeros({n, d});
    index.ids.resize(n);
    double* out = index.vectors.mutable_data().data();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src = order[i];
        index.ids[i] = images.ids[src];
        double norm = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double x = images.vectors.at(src, k);
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (!(norm > 1e-150))
            throw DegenerateInputError("embedding id " + std::to_string(images.ids[src]) +
                                       " has zero norm");
        for (std::size_t k = 0; k < d; ++k) out[i * d + k] = images.vectors.at(src, k) / norm;
    }
    return index;
}

std::vector<int> rank(const Index& index, const Tensor& query) {
    check_query_dim(index, query.rank() == 1 ? query.dim(0) : 0);
    std::vector<double> unit = normalize_query(query);
    std::vector<double> sims;
    similarities(index, unit.data(), sims);

    // rows are stored in ascending id order, so a stable sort on similarity
    // alone realizes the lower-id tie rule
    std::vector<std::size_t> order(index.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });

    std::vector<int> ids(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) ids[i] = index.ids[order[i]];
    return ids;
}

RetrievalReport topk_accuracy(const Index& index, const EmbeddingSet& queries,
                              const std::vector<int>& true_ids, const std::vector<std::size_t>& ks) {
    queries.validate();
    check_query_dim(index, queries.dim());
    const std::size_t nq = queries.count(), n = index.size();
    if (true_ids.size() != nq)
        throw ShapeError("true id count " + std::to_string(true_ids.size()) + " does not match " +
                         std::to_string(nq) + " queries");
    if (ks.empty()) throw ParameterError("at least one k is required");
    for (std::size_t k : ks)
        if (k < 1 || k > n)
            throw ParameterError("k = " + std::to_string(k) + " outside valid range [1, " +
                                 std::to_string(n) + "]");

    std::unordered_map<int, std::size_t> row_of;
    for (std::size_t i = 0; i < n; ++i) row_of[index.ids[i]] = i;
    std::vector<std::size_t> true_rows(nq);
    for (std::size_t q = 0; q < nq; ++q) {
        auto it = row_of.find(true_ids[q]);
        if (it == row_of.end())
            throw DataError("true id " + std::to_string(true_ids[q]) + " is not in the database");
        true_rows[q] = it->second;
    }

    // norms checked serially: worker threads must not throw
    std::vector<double> query_norm(nq);
    for (std::size_t q = 0; q < nq; ++q) {
        double norm = 0.0;
        for (std::size_t k = 0; k < queries.dim(); ++k) {
            const double x = queries.vectors.at(q, k);
            norm += x * x;
        }
        query_norm[q] = std::sqrt(norm);
        if (!(query_norm[q] > 1e-150))
            throw DegenerateInputError("query " + std::to_string(q) + " has zero norm");
    }

    const std::size_t k_max = *std::max_element(ks.begin(), ks.end());
    RetrievalReport report;
    report.ks = ks;
    report.database_size = n;
    report.query_count = nq;
    report.ranked_ids.assign(nq, {});

    // rank of the true id per query; counting beats one pass per query keeps
    // large databases O(n) with no sort
    std::vector<std::size_t> true_rank(nq);
    const std::size_t d = index.dim();
    parallel_for(nq, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> sims;
        std::vector<std::pair<double, int>> top;  // (similarity, id), best first
        std::vector<double> unit(d);
        for (std::size_t q = lo; q < hi; ++q) {
            for (std::size_t k = 0; k < d; ++k) unit[k] = queries.vectors.at(q, k) / query_norm[q];

            similarities(index, unit.data(), sims);

            const double s_true = sims[true_rows[q]];
            const int id_true = index.ids[true_rows[q]];
            std::size_t beaten = 0;
            top.clear();
            for (std::size_t i = 0; i < n; ++i) {
                const double s = sims[i];
                const int id = index.ids[i];
                if (s > s_true || (s == s_true && id < id_true)) ++beaten;
                if (top.size() < k_max || s > top.back().first) {
                    auto pos = std::upper_bound(
                        top.begin(), top.end(), std::make_pair(s, id),
                        [](const auto& a, const auto& b) { return a.first > b.first; });
                    top.insert(pos, {s, id});
                    if (top.size() > k_max) top.pop_back();
                }
            }
            true_rank[q] = beaten + 1;
            report.ranked_ids[q].reserve(top.size());
            for (const auto& [s, id] : top) report.ranked_ids[q].push_back(id);
        }
    });

    for (std::size_t k : ks) {
        std::size_t hits = 0;
        for (std::size_t q = 0; q < nq; ++q)
            if (true_rank[q] <= k) ++hits;
        report.hit_counts.push_back(hits);
        report.accuracy.push_back(static_cast<double>(hits) / static_cast<double>(nq));
    }
    return report;
}

RetrievalReport extended_search(const Index& enlarged, const EmbeddingSet& queries,
                                const std::vector<int>& true_ids,
                                const std::vector<std::size_t>& ks) {
    return topk_accuracy(enlarged, queries, true_ids, ks);
}

EmbeddingSet merge_embedding_sets(const EmbeddingSet& a, const EmbeddingSet& b) {
    a.validate();
    b.validate();
    if (a.dim() != b.dim())
        throw ShapeError("embedding dimensions differ: " + std::to_string(a.dim()) + " vs " +
                         std::to_string(b.dim()));
    for (int id : b.ids)
        if (std::find(a.ids.begin(), a.ids.end(), id) != a.ids.end())
            throw DataError("duplicate id " + std::to_string(id) + " in merged embedding sets");

    EmbeddingSet out;
    out.normalized = a.normalized && b.normalized;
    out.ids = a.ids;
    out.ids.insert(out.ids.end(), b.ids.begin(), b.ids.end());
    out.vectors = Tensor::zeros({a.count() + b.count(), a.dim()});
    auto& dst = out.vectors.mutable_data();
    std::copy(a.vectors.data().begin(), a.vectors.data().end(), dst.begin());
    std::copy(b.vectors.data().begin(), b.vectors.data().end(), dst.begin() + a.vectors.size());
    return out;
}

std::string report_to_text(const RetrievalReport& report) {
    std::string out = "retrieval report\n";
    out += "database_size: " + std::to_string(report.database_size) + "\n";
    out += "query_count: " + std::to_string(report.query_count) + "\n";
    char line[128];
    for (std::size_t i = 0; i < report.ks.size(); ++i) {
        std::snprintf(line, sizeof(line), "top_%zu: hits %zu / %zu accuracy %.6f\n", report.ks[i],
                      report.hit_counts[i], report.query_count, report.accuracy[i]);
        out += line;
    }
    return out;
}

}  // namespace naln

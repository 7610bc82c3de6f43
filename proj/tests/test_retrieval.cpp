#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "naln/errors.hpp"
#include "naln/retrieval.hpp"

using namespace naln;

namespace {

EmbeddingSet make_set(Tensor vectors, std::vector<int> ids) {
    EmbeddingSet s;
    s.vectors = std::move(vectors);
    s.ids = std::move(ids);
    return s;
}

EmbeddingSet random_set(std::size_t n, std::size_t d, Rng& rng) {
    std::vector<int> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    return make_set(testutil::random_tensor({n, d}, rng), std::move(ids));
}

// independent similarity sort straight from the definition
std::vector<int> oracle_rank(const EmbeddingSet& db, const std::vector<double>& query) {
    const std::size_t n = db.count(), d = db.dim();
    double qn = 0.0;
    for (double x : query) qn += x * x;
    qn = std::sqrt(qn);
    std::vector<std::pair<double, int>> scored(n);
    for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0, rn = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            dot += db.vectors.at(i, k) * query[k];
            rn += db.vectors.at(i, k) * db.vectors.at(i, k);
        }
        scored[i] = {dot / (std::sqrt(rn) * qn), db.ids[i]};
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<int> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = scored[i].second;
    return ids;
}

Tensor row_of(const EmbeddingSet& s, std::size_t i) {
    Tensor out = Tensor::zeros({s.dim()});
    for (std::size_t k = 0; k < s.dim(); ++k) out.mutable_data()[k] = s.vectors.at(i, k);
    return out;
}

}  // namespace

TEST_SUITE("retrieval") {

TEST_CASE("database rows retrieve themselves first") {
    Rng rng(3);
    EmbeddingSet db = random_set(20, 6, rng);
    Index index = build_index(db);
    CHECK(index.size() == 20);
    for (std::size_t j : {0u, 7u, 19u}) {
        std::vector<int> ranked = rank(index, row_of(db, j));
        CHECK(ranked.front() == db.ids[j]);
        CHECK(ranked.size() == 20);
    }
}

TEST_CASE("near-orthogonal fixture ranks the only correlated row first") {
    Tensor vectors = Tensor::zeros({4, 5});
    for (std::size_t i = 0; i < 4; ++i) vectors.mutable_data()[i * 5 + i] = 1.0;
    Index index = build_index(make_set(vectors, {10, 11, 12, 13}));

    Tensor query = Tensor::zeros({5});
    query.mutable_data()[2] = 0.7;
    std::vector<int> ranked = rank(index, query);
    CHECK(ranked == std::vector<int>{12, 10, 11, 13});  // zeros tie in id order
}

TEST_CASE("identical rows break ties toward the lower id") {
    Tensor vectors = Tensor::from({2, 3}, {1, 2, 3, 1, 2, 3});
    Index index = build_index(make_set(vectors, {7, 3}));
    Tensor query = Tensor::from({3}, {1, 2, 3});
    std::vector<int> ranked = rank(index, query);
    CHECK(ranked == std::vector<int>{3, 7});
}

TEST_CASE("rank matches a brute-force similarity sort including tie order") {
    Rng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 1 + rng.integer(50);
        const std::size_t d = 2 + rng.integer(7);
        Tensor vectors = testutil::random_tensor({n, d}, rng);
        // inject duplicate rows to force similarity ties
        for (std::size_t i = 1; i < n; ++i)
            if (rng.uniform(0.0, 1.0) < 0.3) {
                const std::size_t src = rng.integer(i);
                for (std::size_t k = 0; k < d; ++k)
                    vectors.mutable_data()[i * d + k] = vectors.at(src, k);
            }
        std::vector<int> ids(n);
        std::iota(ids.begin(), ids.end(), 100);
        EmbeddingSet db = make_set(vectors, ids);
        Index index = build_index(db);

        for (int q = 0; q < 5; ++q) {
            std::vector<double> query(d);
            for (double& x : query) x = rng.normal();
            Tensor qt = Tensor::from({d}, query);
            CHECK(rank(index, qt) == oracle_rank(db, query));
        }
    }
}

TEST_CASE("rank is invariant to positive query scaling") {
    Rng rng(23);
    EmbeddingSet db = random_set(15, 4, rng);
    Index index = build_index(db);
    Tensor query = testutil::random_tensor({4}, rng);
    Tensor scaled = Tensor::zeros({4});
    for (std::size_t k = 0; k < 4; ++k) scaled.mutable_data()[k] = 3.7 * query.at(k);
    CHECK(rank(index, query) == rank(index, scaled));
}

TEST_CASE("perfect queries give accuracy one and ranked lists match rank()") {
    Rng rng(31);
    EmbeddingSet db = random_set(12, 5, rng);
    Index index = build_index(db);
    RetrievalReport report = topk_accuracy(index, db, db.ids, {1, 3, 12});
    CHECK(report.accuracy == std::vector<double>{1.0, 1.0, 1.0});
    CHECK(report.hit_counts == std::vector<std::size_t>{12, 12, 12});
    CHECK(report.database_size == 12);
    CHECK(report.query_count == 12);
    for (std::size_t q = 0; q < 12; ++q) {
        std::vector<int> full = rank(index, row_of(db, q));
        full.resize(12);
        CHECK(report.ranked_ids[q] == full);
    }
}

TEST_CASE("accuracy is nondecreasing in k and exact at k = n") {
    Rng rng(37);
    EmbeddingSet db = random_set(25, 6, rng);
    Index index = build_index(db);
    EmbeddingSet queries = random_set(40, 6, rng);
    std::vector<int> true_ids(40);
    for (std::size_t q = 0; q < 40; ++q) true_ids[q] = static_cast<int>(q % 25);

    std::vector<std::size_t> ks = {1, 2, 5, 10, 25};
    RetrievalReport report = topk_accuracy(index, queries, true_ids, ks);
    for (std::size_t i = 1; i < ks.size(); ++i) CHECK(report.accuracy[i] >= report.accuracy[i - 1]);
    CHECK(report.accuracy.back() == 1.0);
    for (double a : report.accuracy) {
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
    }
}

TEST_CASE("random queries score at chance level") {
    Rng rng(41);
    const std::size_t K = 50, nq = 2000;
    EmbeddingSet db = random_set(K, 24, rng);
    Index index = build_index(db);
    EmbeddingSet queries = random_set(nq, 24, rng);
    std::vector<int> true_ids(nq);
    for (std::size_t q = 0; q < nq; ++q) true_ids[q] = static_cast<int>(q % K);

    RetrievalReport report = topk_accuracy(index, queries, true_ids, {1});
    const double p = 1.0 / static_cast<double>(K);
    const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(nq));
    CHECK(std::fabs(report.accuracy[0] - p) <= 3.0 * sigma);
}

TEST_CASE("input validation") {
    Rng rng(43);
    EmbeddingSet db = random_set(10, 4, rng);

    SUBCASE("zero-norm database row names the id") {
        for (std::size_t k = 0; k < 4; ++k) db.vectors.mutable_data()[3 * 4 + k] = 0.0;
        try {
            build_index(db);
            FAIL("expected DegenerateInputError");
        } catch (const DegenerateInputError& e) {
            CHECK(std::string(e.what()).find("3") != std::string::npos);
        }
    }

    SUBCASE("zero-norm queries are rejected") {
        Index index = build_index(db);
        CHECK_THROWS_AS(rank(index, Tensor::zeros({4})), DegenerateInputError);
        EmbeddingSet queries = random_set(3, 4, rng);
        for (std::size_t k = 0; k < 4; ++k) queries.vectors.mutable_data()[1 * 4 + k] = 0.0;
        CHECK_THROWS_AS(topk_accuracy(index, queries, {0, 1, 2}, {1}), DegenerateInputError);
    }

    SUBCASE("k range, id membership, and shape checks") {
        Index index = build_index(db);
        EmbeddingSet queries = random_set(3, 4, rng);
        CHECK_THROWS_AS(topk_accuracy(index, queries, {0, 1, 2}, {0}), ParameterError);
        CHECK_THROWS_AS(topk_accuracy(index, queries, {0, 1, 2}, {11}), ParameterError);
        CHECK_THROWS_AS(topk_accuracy(index, queries, {0, 1, 2}, {}), ParameterError);
        CHECK_THROWS_AS(topk_accuracy(index, queries, {0, 1, 99}, {1}), DataError);
        CHECK_THROWS_AS(topk_accuracy(index, queries, {0, 1}, {1}), ShapeError);
        CHECK_THROWS_AS(rank(index, Tensor::zeros({7})), ShapeError);
        EmbeddingSet wide = random_set(3, 7, rng);
        CHECK_THROWS_AS(topk_accuracy(index, wide, {0, 1, 2}, {1}), ShapeError);
    }
}

TEST_CASE("merging embedding sets") {
    Rng rng(47);
    EmbeddingSet a = random_set(4, 3, rng);
    EmbeddingSet b = random_set(3, 3, rng);
    for (auto& id : b.ids) id += 100;

    EmbeddingSet merged = merge_embedding_sets(a, b);
    CHECK(merged.count() == 7);
    CHECK(merged.ids == std::vector<int>{0, 1, 2, 3, 100, 101, 102});
    CHECK(merged.vectors.at(5, 2) == b.vectors.at(1, 2));

    EmbeddingSet clash = random_set(2, 3, rng);
    clash.ids = {100, 5};
    CHECK_THROWS_AS(merge_embedding_sets(b, clash), DataError);
    EmbeddingSet wrong_dim = random_set(2, 5, rng);
    wrong_dim.ids = {200, 201};
    CHECK_THROWS_AS(merge_embedding_sets(a, wrong_dim), ShapeError);
}

TEST_CASE("extra distractors never raise accuracy") {
    Rng rng(53);
    EmbeddingSet db = random_set(30, 8, rng);
    EmbeddingSet extra = random_set(40, 8, rng);
    for (auto& id : extra.ids) id += 1000;

    // noisy copies of database rows
    EmbeddingSet queries = random_set(60, 8, rng);
    std::vector<int> true_ids(60);
    for (std::size_t q = 0; q < 60; ++q) {
        true_ids[q] = static_cast<int>(q % 30);
        for (std::size_t k = 0; k < 8; ++k)
            queries.vectors.mutable_data()[q * 8 + k] =
                db.vectors.at(q % 30, k) + 0.8 * rng.normal();
    }

    std::vector<std::size_t> ks = {1, 3, 10};
    RetrievalReport small = topk_accuracy(build_index(db), queries, true_ids, ks);
    RetrievalReport large =
        extended_search(build_index(merge_embedding_sets(db, extra)), queries, true_ids, ks);
    CHECK(large.database_size == 70);
    for (std::size_t i = 0; i < ks.size(); ++i) CHECK(large.accuracy[i] <= small.accuracy[i]);
}

TEST_CASE("orthogonal distractors leave accuracy unchanged") {
    Rng rng(59);
    const std::size_t d = 8;
    EmbeddingSet db = random_set(10, d, rng);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t k = 4; k < d; ++k) db.vectors.mutable_data()[i * d + k] = 0.0;
    EmbeddingSet extra = random_set(6, d, rng);
    for (auto& id : extra.ids) id += 500;
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t k = 0; k < 4; ++k) extra.vectors.mutable_data()[i * d + k] = 0.0;

    EmbeddingSet queries = random_set(20, d, rng);
    std::vector<int> true_ids(20);
    for (std::size_t q = 0; q < 20; ++q) {
        true_ids[q] = static_cast<int>(q % 10);
        for (std::size_t k = 0; k < d; ++k)
            queries.vectors.mutable_data()[q * d + k] =
                k < 4 ? db.vectors.at(q % 10, k) + 0.1 * rng.normal() : 0.0;
    }

    std::vector<std::size_t> ks = {1, 2, 5};
    RetrievalReport small = topk_accuracy(build_index(db), queries, true_ids, ks);
    RetrievalReport large =
        extended_search(build_index(merge_embedding_sets(db, extra)), queries, true_ids, ks);
    CHECK(small.accuracy == large.accuracy);
}

TEST_CASE("report text carries exact counts") {
    RetrievalReport report;
    report.database_size = 200;
    report.query_count = 10000;
    report.ks = {1, 5};
    report.hit_counts = {52, 258};
    report.accuracy = {0.0052, 0.0258};
    CHECK(report_to_text(report) ==
          "retrieval report\n"
          "database_size: 200\n"
          "query_count: 10000\n"
          "top_1: hits 52 / 10000 accuracy 0.005200\n"
          "top_5: hits 258 / 10000 accuracy 0.025800\n");
}

}  // TEST_SUITE

#include "helpers.hpp"

#include <algorithm>
#include <random>
#include <vector>

#include "retfuse/errors.hpp"
#include "retfuse/metrics.hpp"

using namespace retfuse;

namespace {

torch::Tensor l2rows(torch::Tensor t) {
    return t / t.norm(2, /*dim=*/1, /*keepdim=*/true);
}

// exhaustive-sort reference implementation, written independently of the
// production rank computation
double recall_reference(const torch::Tensor& q, const torch::Tensor& g,
                        const std::vector<int64_t>& matches, int64_t k) {
    auto sims = torch::matmul(q, g.t()).to(torch::kFloat64);
    int64_t hits = 0;
    for (int64_t i = 0; i < q.size(0); ++i) {
        std::vector<int64_t> order(g.size(0));
        for (int64_t j = 0; j < g.size(0); ++j) order[j] = j;
        auto s = sims[i];
        std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
            return s[a].item<double>() > s[b].item<double>();
        });
        auto pos = std::find(order.begin(), order.end(), matches[i]) - order.begin();
        if (pos < k) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(q.size(0));
}

} // namespace

TEST_CASE("recall on hand-built similarities") {
    // gallery = identity basis, queries point at their match
    auto g = torch::eye(4);
    auto q = torch::eye(4);
    std::vector<int64_t> matches{0, 1, 2, 3};
    CHECK(recall_at_k(q, g, matches, 1) == doctest::Approx(100.0));

    // one query points at the wrong gallery item
    auto q2 = q.clone();
    q2[0] = g[1];
    CHECK(recall_at_k(q2, g, matches, 1) == doctest::Approx(75.0));
    CHECK(recall_at_k(q2, g, matches, 2) == doctest::Approx(100.0));
}

TEST_CASE("ties break toward the lower gallery index") {
    // duplicate gallery rows: match at index 1 loses the tie against index 0
    auto g = torch::zeros({3, 2});
    g[0][0] = 1;
    g[1][0] = 1;
    g[2][1] = 1;
    auto q = torch::zeros({1, 2});
    q[0][0] = 1;
    CHECK(recall_at_k(q, g, {1}, 1) == doctest::Approx(0.0));
    CHECK(recall_at_k(q, g, {0}, 1) == doctest::Approx(100.0));
    CHECK(recall_at_k(q, g, {1}, 2) == doctest::Approx(100.0));
}

TEST_CASE("k equal to the gallery size always gives 100 percent") {
    torch::manual_seed(7);
    auto q = l2rows(torch::randn({9, 6}));
    auto g = l2rows(torch::randn({13, 6}));
    std::vector<int64_t> matches{4, 0, 12, 3, 3, 7, 1, 9, 5};
    CHECK(recall_at_k(q, g, matches, 13) == doctest::Approx(100.0));
}

TEST_CASE("k beyond the gallery raises") {
    auto q = torch::eye(2);
    CHECK_THROWS_AS(recall_at_k(q, q, {0, 1}, 3), KOutOfRange);
}

TEST_CASE("agrees with the exhaustive-sort reference on random instances") {
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 200; ++trial) {
        torch::manual_seed(1000 + trial);
        int64_t m = 2 + static_cast<int64_t>(rng() % 15); // gallery size
        int64_t n = 1 + static_cast<int64_t>(rng() % 10); // queries
        int64_t d = 3 + static_cast<int64_t>(rng() % 6);
        auto q = l2rows(torch::randn({n, d}));
        auto g = l2rows(torch::randn({m, d}));
        std::vector<int64_t> matches;
        for (int64_t i = 0; i < n; ++i) matches.push_back(static_cast<int64_t>(rng() % m));
        int64_t k = 1 + static_cast<int64_t>(rng() % m);
        CAPTURE(trial);
        CHECK(recall_at_k(q, g, matches, k) ==
              doctest::Approx(recall_reference(q, g, matches, k)).epsilon(1e-12));
    }
}

TEST_CASE("recall is invariant under a shared orthogonal rotation") {
    torch::manual_seed(5);
    auto q = l2rows(torch::randn({8, 5}).to(torch::kFloat64));
    auto g = l2rows(torch::randn({12, 5}).to(torch::kFloat64));
    std::vector<int64_t> matches{3, 3, 0, 11, 7, 2, 5, 9};

    // QR of a random matrix gives an orthogonal factor
    auto qr = torch::linalg_qr(torch::randn({5, 5}).to(torch::kFloat64));
    auto rot = std::get<0>(qr);
    for (int64_t k : {1, 3, 5}) {
        CHECK(recall_at_k(q.to(torch::kFloat), g.to(torch::kFloat), matches, k) ==
              doctest::Approx(recall_at_k(torch::matmul(q, rot).to(torch::kFloat),
                                          torch::matmul(g, rot).to(torch::kFloat), matches, k))
                  .epsilon(1e-12));
    }
}

TEST_CASE("argmax over five logits") {
    auto t = torch::tensor({0.1f, 2.0f, -1.0f, 2.0f, 0.0f});
    CHECK(argmax5(t) == 1); // tie between 1 and 3 resolves low

    auto u = torch::tensor({-3.0f, -2.0f, -1.0f, -0.5f, -0.4f});
    CHECK(argmax5(u) == 4);

    // positive scaling does not change the argmax
    CHECK(argmax5(u * 10.0) == argmax5(u));
}

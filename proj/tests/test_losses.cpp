#include "helpers.hpp"

#include <cmath>

#include "retfuse/errors.hpp"
#include "retfuse/losses.hpp"

using namespace retfuse;

namespace {

torch::Tensor l2rows(torch::Tensor t) {
    return t / t.norm(2, /*dim=*/1, /*keepdim=*/true);
}

// independent double-precision reference for the symmetric contrastive loss
double contrastive_reference(const torch::Tensor& a, const torch::Tensor& b, double tau) {
    const int64_t n = a.size(0);
    auto s = torch::matmul(a.to(torch::kFloat64), b.to(torch::kFloat64).t()) / tau;
    double total = 0;
    for (int64_t i = 0; i < n; ++i) {
        double row_lse = 0, col_lse = 0;
        double row_max = -1e300, col_max = -1e300;
        for (int64_t j = 0; j < n; ++j) {
            row_max = std::max(row_max, s[i][j].item<double>());
            col_max = std::max(col_max, s[j][i].item<double>());
        }
        for (int64_t j = 0; j < n; ++j) {
            row_lse += std::exp(s[i][j].item<double>() - row_max);
            col_lse += std::exp(s[j][i].item<double>() - col_max);
        }
        total += (row_max + std::log(row_lse) - s[i][i].item<double>());
        total += (col_max + std::log(col_lse) - s[i][i].item<double>());
    }
    return total / (2.0 * static_cast<double>(n));
}

} // namespace

TEST_CASE("contrastive loss of a single pair is zero") {
    auto a = l2rows(torch::randn({1, 8}));
    auto b = l2rows(torch::randn({1, 8}));
    CHECK(contrastive_loss(a, b, 0.07).item<double>() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("two orthonormal pairs match the closed form") {
    // S = I / tau, so each cross-entropy term is log(1 + exp(-1/tau))
    auto a = torch::eye(2);
    auto b = torch::eye(2);
    const double tau = 0.07;
    double expected = std::log(1.0 + std::exp(-1.0 / tau));
    CHECK(contrastive_loss(a, b, tau).item<double>() == doctest::Approx(expected).epsilon(1e-6));

    // anti-aligned pairs: diagonal -1/tau, off-diagonal 0
    auto b2 = -torch::eye(2);
    double worst = 1.0 / tau + std::log(1.0 + std::exp(-1.0 / tau));
    CHECK(contrastive_loss(a, b2, tau).item<double>() == doctest::Approx(worst).epsilon(1e-6));
}

TEST_CASE("random batches agree with the brute-force reference") {
    for (int trial = 0; trial < 20; ++trial) {
        torch::manual_seed(50 + trial);
        auto a = l2rows(torch::randn({4, 16}));
        auto b = l2rows(torch::randn({4, 16}));
        CAPTURE(trial);
        CHECK(contrastive_loss(a, b, 0.07).item<double>() ==
              doctest::Approx(contrastive_reference(a, b, 0.07)).epsilon(1e-5));
    }
}

TEST_CASE("contrastive loss is symmetric in its arguments") {
    torch::manual_seed(3);
    auto a = l2rows(torch::randn({5, 12}));
    auto b = l2rows(torch::randn({5, 12}));
    CHECK(contrastive_loss(a, b, 0.07).item<double>() ==
          doctest::Approx(contrastive_loss(b, a, 0.07).item<double>()).epsilon(1e-6));
}

TEST_CASE("aligned pairs score lower than shuffled pairs") {
    torch::manual_seed(9);
    auto a = l2rows(torch::randn({6, 10}));
    auto aligned = contrastive_loss(a, a, 0.07).item<double>();
    auto shuffled = contrastive_loss(a, a.roll(1, 0), 0.07).item<double>();
    CHECK(aligned < shuffled);
}

TEST_CASE("unnormalized inputs are rejected") {
    auto a = torch::full({2, 4}, 0.9f);
    auto b = l2rows(torch::randn({2, 4}));
    CHECK_THROWS_AS(contrastive_loss(a, b, 0.07), NotNormalized);
    CHECK_THROWS_AS(contrastive_loss(b, a, 0.07), NotNormalized);
}

TEST_CASE("image reconstruction loss is plain mean squared error") {
    auto pred = torch::full({2, 3, 4, 4}, 0.5f);
    auto target = torch::zeros({2, 3, 4, 4});
    CHECK(reconstruction_image_loss(pred, target).item<double>() == doctest::Approx(0.25).epsilon(1e-7));
    CHECK(reconstruction_image_loss(target, target).item<double>() == doctest::Approx(0.0));

    // one differing element out of 96: (0.6)^2 / 96
    auto pred2 = target.clone();
    pred2[0][0][0][0] = 0.6;
    CHECK(reconstruction_image_loss(pred2, target).item<double>() ==
          doctest::Approx(0.36 / 96.0).epsilon(1e-6));

    CHECK_THROWS_AS(reconstruction_image_loss(torch::zeros({1, 3, 4, 4}), torch::zeros({1, 3, 5, 5})),
                    ShapeMismatch);
}

TEST_CASE("text reconstruction loss with uniform logits is log vocab size") {
    const int64_t V = 11;
    auto logits = torch::zeros({2, 6, V});
    auto ids = torch::randint(0, V, {2, 6});
    auto mask = torch::ones({2, 6}, torch::kInt64);
    CHECK(reconstruction_text_loss(logits, ids, mask).item<double>() ==
          doctest::Approx(std::log(static_cast<double>(V))).epsilon(1e-6));
}

TEST_CASE("padded positions do not contribute to the text loss") {
    const int64_t V = 7;
    auto logits = torch::zeros({1, 4, V});
    // make position 0 fully confident and correct; positions 1-3 are padding
    logits.index_put_({0, 0, 2}, 50.0);
    auto ids = torch::tensor({{2L, 5L, 5L, 5L}});
    auto mask = torch::tensor({{1L, 0L, 0L, 0L}});
    CHECK(reconstruction_text_loss(logits, ids, mask).item<double>() == doctest::Approx(0.0).epsilon(1e-9));

    // garbage in the padded slots must not change anything
    auto logits2 = logits.clone();
    logits2.index_put_({0, 2, 1}, -30.0);
    CHECK(reconstruction_text_loss(logits2, ids, mask).item<double>() ==
          doctest::Approx(reconstruction_text_loss(logits, ids, mask).item<double>()));

    CHECK_THROWS_AS(reconstruction_text_loss(logits, ids, torch::zeros({1, 4}, torch::kInt64)), EmptyMask);
}

TEST_CASE("classification loss averages two five-way cross-entropies") {
    auto zeros = torch::zeros({3, 5});
    auto labels = torch::tensor({0L, 2L, 4L});
    CHECK(classification_loss(zeros, zeros, labels, labels).item<double>() ==
          doctest::Approx(std::log(5.0)).epsilon(1e-6));

    // perfectly confident grading head on one task, uniform on the other
    auto confident = torch::zeros({3, 5});
    for (int64_t i = 0; i < 3; ++i) confident.index_put_({i, labels[i].item<int64_t>()}, 60.0);
    CHECK(classification_loss(confident, zeros, labels, labels).item<double>() ==
          doctest::Approx(0.5 * std::log(5.0)).epsilon(1e-6));

    CHECK_THROWS_AS(classification_loss(zeros, zeros, torch::tensor({0L, 5L, 1L}), labels), LabelOutOfRange);
}

namespace {

std::array<torch::Tensor, 6> constant_components(const std::array<double, 6>& vals,
                                                 const std::array<bool, 6>& enabled) {
    std::array<torch::Tensor, 6> out;
    for (int i = 0; i < 6; ++i)
        if (enabled[i]) out[i] = torch::tensor(vals[i]);
    return out;
}

} // namespace

TEST_CASE("equal alphas weight every enabled term equally") {
    std::array<double, 6> vals{1, 2, 3, 4, 5, 6};
    std::array<bool, 6> all{true, true, true, true, true, true};
    auto bd = total_loss(torch::zeros({6}), constant_components(vals, all), all);
    for (int i = 0; i < 6; ++i) CHECK(bd.weights[i] == doctest::Approx(1.0 / 6.0).epsilon(1e-6));
    CHECK(bd.total == doctest::Approx(3.5).epsilon(1e-6));
}

TEST_CASE("disabled terms leave the softmax entirely") {
    std::array<double, 6> vals{1, 2, 3, 4, 5, 6};
    std::array<bool, 6> enabled{true, false, false, false, false, true};
    auto bd = total_loss(torch::zeros({6}), constant_components(vals, enabled), enabled);
    CHECK(bd.weights[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(bd.weights[5] == doctest::Approx(0.5).epsilon(1e-9));
    for (int i = 1; i < 5; ++i) CHECK(bd.weights[i] == 0.0);
    CHECK(bd.total == doctest::Approx(3.5).epsilon(1e-9));
}

TEST_CASE("unequal alphas follow the softmax closed form") {
    std::array<double, 6> vals{1, 2, 3, 4, 5, 6};
    std::array<bool, 6> all{true, true, true, true, true, true};
    auto alphas = torch::tensor({0.3, -1.0, 0.0, 2.0, 0.5, -0.2});
    auto bd = total_loss(alphas, constant_components(vals, all), all);
    double z = 0;
    for (int i = 0; i < 6; ++i) z += std::exp(alphas[i].item<double>());
    double expected_total = 0;
    for (int i = 0; i < 6; ++i) {
        double w = std::exp(alphas[i].item<double>()) / z;
        CHECK(bd.weights[i] == doctest::Approx(w).epsilon(1e-6));
        expected_total += w * vals[i];
    }
    CHECK(bd.total == doctest::Approx(expected_total).epsilon(1e-6));
}

TEST_CASE("weights are invariant to a constant shift of the alphas") {
    std::array<double, 6> vals{0.5, 1.5, 0.25, 2.0, 0.75, 1.0};
    std::array<bool, 6> all{true, true, true, true, true, true};
    auto alphas = torch::tensor({0.3, -1.0, 0.0, 2.0, 0.5, -0.2}, torch::kFloat64);
    auto bd1 = total_loss(alphas, constant_components(vals, all), all);
    auto bd2 = total_loss(alphas + 7.0, constant_components(vals, all), all);
    for (int i = 0; i < 6; ++i) CHECK(bd1.weights[i] == doctest::Approx(bd2.weights[i]).epsilon(1e-9));
    CHECK(bd1.total == doctest::Approx(bd2.total).epsilon(1e-9));
}

TEST_CASE("alpha gradients match central finite differences") {
    std::array<double, 6> vals{1.0, 0.5, 2.0, 0.25, 1.5, 0.75};
    std::array<bool, 6> all{true, true, true, true, true, true};
    auto alphas = torch::tensor({0.1, -0.4, 0.2, 0.7, -0.1, 0.3},
                                torch::TensorOptions().dtype(torch::kFloat64).requires_grad(true));
    auto bd = total_loss(alphas, constant_components(vals, all), all);
    bd.total_tensor.backward();
    auto grad = alphas.grad();

    const double h = 1e-5;
    for (int i = 0; i < 6; ++i) {
        auto ap = alphas.detach().clone();
        auto am = alphas.detach().clone();
        ap[i] += h;
        am[i] -= h;
        double fp = total_loss(ap, constant_components(vals, all), all).total;
        double fm = total_loss(am, constant_components(vals, all), all).total;
        double fd = (fp - fm) / (2 * h);
        CHECK(grad[i].item<double>() == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("non-finite components are rejected") {
    std::array<bool, 6> all{true, true, true, true, true, true};
    std::array<torch::Tensor, 6> comps = constant_components({1, 1, 1, 1, 1, 1}, all);
    comps[2] = torch::tensor(std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(total_loss(torch::zeros({6}), comps, all), NonFiniteComponent);
}

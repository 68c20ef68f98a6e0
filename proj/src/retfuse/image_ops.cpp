#include "retfuse/image_ops.hpp"

#include <cmath>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "retfuse/errors.hpp"

namespace retfuse {

torch::Tensor decode_image(const std::string& path) {
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    if (bgr.empty()) throw DecodeError("cannot decode image: " + path);
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    auto t = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8).clone();
    return t.permute({2, 0, 1}).to(torch::kFloat32).div_(255.0);
}

torch::Tensor bilinear_resize(const torch::Tensor& chw, int64_t out_h, int64_t out_w) {
    TORCH_CHECK(chw.dim() == 3, "bilinear_resize expects CHW");
    auto in = chw.contiguous();
    const int64_t c = in.size(0), ih = in.size(1), iw = in.size(2);
    if (ih == out_h && iw == out_w) return in.clone();
    auto out = torch::empty({c, out_h, out_w}, in.options());
    auto src = in.accessor<float, 3>();
    auto dst = out.accessor<float, 3>();
    const double sy = static_cast<double>(ih) / out_h;
    const double sx = static_cast<double>(iw) / out_w;
    for (int64_t y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int64_t y0 = static_cast<int64_t>(std::floor(fy));
        double wy = fy - y0;
        int64_t y0c = std::clamp<int64_t>(y0, 0, ih - 1);
        int64_t y1c = std::clamp<int64_t>(y0 + 1, 0, ih - 1);
        for (int64_t x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int64_t x0 = static_cast<int64_t>(std::floor(fx));
            double wx = fx - x0;
            int64_t x0c = std::clamp<int64_t>(x0, 0, iw - 1);
            int64_t x1c = std::clamp<int64_t>(x0 + 1, 0, iw - 1);
            for (int64_t ch = 0; ch < c; ++ch) {
                double top = (1 - wx) * src[ch][y0c][x0c] + wx * src[ch][y0c][x1c];
                double bot = (1 - wx) * src[ch][y1c][x0c] + wx * src[ch][y1c][x1c];
                dst[ch][y][x] = static_cast<float>((1 - wy) * top + wy * bot);
            }
        }
    }
    return out;
}

torch::Tensor standardize_imagenet(const torch::Tensor& chw01) {
    TORCH_CHECK(chw01.dim() == 3 && chw01.size(0) == 3, "standardize expects 3xHxW");
    auto mean = torch::tensor({kImagenetMean[0], kImagenetMean[1], kImagenetMean[2]}).view({3, 1, 1});
    auto std = torch::tensor({kImagenetStd[0], kImagenetStd[1], kImagenetStd[2]}).view({3, 1, 1});
    return (chw01 - mean) / std;
}

torch::Tensor preprocess_image01(const torch::Tensor& chw01, int64_t side) {
    return bilinear_resize(chw01, side, side);
}

AugmentDraws sample_augment_draws(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    AugmentDraws d;
    d.flip_h = unit(rng) < 0.5;
    d.flip_v = unit(rng) < 0.5;
    d.angle_deg = -15.0 + 30.0 * unit(rng);
    d.brightness = 0.9 + 0.2 * unit(rng);
    d.contrast = 0.9 + 0.2 * unit(rng);
    return d;
}

namespace {

// Inverse-mapping rotation about the image center, bilinear sampling,
// zero fill outside the source.
torch::Tensor rotate_bilinear(const torch::Tensor& chw, double angle_deg) {
    if (angle_deg == 0.0) return chw.clone();
    auto in = chw.contiguous();
    const int64_t c = in.size(0), h = in.size(1), w = in.size(2);
    auto out = torch::zeros_like(in);
    auto src = in.accessor<float, 3>();
    auto dst = out.accessor<float, 3>();
    const double rad = angle_deg * M_PI / 180.0;
    const double ca = std::cos(rad), sa = std::sin(rad);
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            double dx = x - cx, dy = y - cy;
            double sxf = ca * dx + sa * dy + cx;
            double syf = -sa * dx + ca * dy + cy;
            int64_t x0 = static_cast<int64_t>(std::floor(sxf));
            int64_t y0 = static_cast<int64_t>(std::floor(syf));
            double wx = sxf - x0, wy = syf - y0;
            for (int64_t ch = 0; ch < c; ++ch) {
                double acc = 0;
                for (int dyi = 0; dyi <= 1; ++dyi) {
                    for (int dxi = 0; dxi <= 1; ++dxi) {
                        int64_t yy = y0 + dyi, xx = x0 + dxi;
                        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                        double wgt = (dxi ? wx : 1 - wx) * (dyi ? wy : 1 - wy);
                        acc += wgt * src[ch][yy][xx];
                    }
                }
                dst[ch][y][x] = static_cast<float>(acc);
            }
        }
    }
    return out;
}

} // namespace

torch::Tensor augment_with_draws(const torch::Tensor& chw01, const AugmentDraws& draws) {
    TORCH_CHECK(chw01.dim() == 3, "augment expects CHW");
    auto img = chw01;
    if (draws.flip_h) img = img.flip({2});
    if (draws.flip_v) img = img.flip({1});
    img = rotate_bilinear(img, draws.angle_deg);
    img = img * draws.brightness;
    auto mean = img.mean();
    img = (img - mean) * draws.contrast + mean;
    return img.clamp(0.0, 1.0);
}

torch::Tensor augment_image(const torch::Tensor& chw01, std::mt19937_64& rng) {
    return augment_with_draws(chw01, sample_augment_draws(rng));
}

uint64_t child_seed(uint64_t base, uint64_t index) {
    // splitmix64 over the combined value
    uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace retfuse

#include "retfuse/plots.hpp"

#include <cmath>
#include <fstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "retfuse/csv.hpp"
#include "retfuse/errors.hpp"

namespace retfuse {

namespace {

constexpr int kW = 800, kH = 500, kMargin = 60;

const std::vector<cv::Scalar>& palette() {
    static const std::vector<cv::Scalar> p = {
        {180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214}, {189, 103, 148}, {75, 86, 140}};
    return p;
}

cv::Point map_point(double x, double x_max, double y, double y_max) {
    double px = kMargin + (kW - 2 * kMargin) * (x_max > 0 ? x / x_max : 0);
    double py = kH - kMargin - (kH - 2 * kMargin) * (y_max > 0 ? y / y_max : 0);
    return {static_cast<int>(px), static_cast<int>(py)};
}

void draw_axes(cv::Mat& img, const std::string& title) {
    img.setTo(cv::Scalar(255, 255, 255));
    cv::line(img, {kMargin, kH - kMargin}, {kW - kMargin, kH - kMargin}, {0, 0, 0}, 1);
    cv::line(img, {kMargin, kH - kMargin}, {kMargin, kMargin}, {0, 0, 0}, 1);
    cv::putText(img, title, {kMargin, kMargin / 2}, cv::FONT_HERSHEY_SIMPLEX, 0.6, {0, 0, 0}, 1);
}

void save(const cv::Mat& img, const std::string& path) {
    if (!cv::imwrite(path, img)) throw IoError("cannot write plot: " + path);
}

void draw_series(cv::Mat& img, const std::vector<std::vector<double>>& series,
                 const std::vector<std::string>& names, double y_max) {
    const size_t n = series.empty() ? 0 : series[0].size();
    for (size_t s = 0; s < series.size(); ++s) {
        auto color = palette()[s % palette().size()];
        for (size_t i = 1; i < n; ++i) {
            auto p0 = map_point(static_cast<double>(i - 1), static_cast<double>(n - 1), series[s][i - 1], y_max);
            auto p1 = map_point(static_cast<double>(i), static_cast<double>(n - 1), series[s][i], y_max);
            cv::line(img, p0, p1, color, 2);
        }
        cv::putText(img, names[s], {kW - kMargin - 170, kMargin + 20 * static_cast<int>(s)},
                    cv::FONT_HERSHEY_SIMPLEX, 0.45, color, 1);
    }
}

const char* kComponentNames[6] = {"img_txt", "img_str", "txt_str", "rec_img", "rec_txt", "cls"};

} // namespace

void plot_history(const std::vector<EpochRecord>& history, const std::string& out_path_losses,
                  const std::string& out_path_weights) {
    if (history.empty()) throw Error("history is empty, nothing to plot");
    for (const auto& r : history) {
        double wsum = 0;
        for (double w : r.weights) wsum += w;
        if (std::abs(wsum - 1.0) > 1e-6)
            throw Error("weight row at epoch " + std::to_string(r.epoch) + " sums to " + std::to_string(wsum));
    }

    std::vector<std::vector<double>> losses(6), weights(6);
    double loss_max = 1e-12;
    for (const auto& r : history) {
        for (int i = 0; i < 6; ++i) {
            losses[i].push_back(r.components[i]);
            weights[i].push_back(r.weights[i]);
            loss_max = std::max(loss_max, r.components[i]);
        }
    }
    std::vector<std::string> names(kComponentNames, kComponentNames + 6);

    cv::Mat img(kH, kW, CV_8UC3);
    draw_axes(img, "loss components per epoch");
    draw_series(img, losses, names, loss_max * 1.05);
    save(img, out_path_losses);

    draw_axes(img, "softmax loss weights per epoch");
    draw_series(img, weights, names, 1.0);
    save(img, out_path_weights);
}

void plot_recall_bars(const RetrievalReport& report, const std::string& out_path) {
    cv::Mat img(kH, kW, CV_8UC3);
    draw_axes(img, "recall@K (" + report.protocol + (report.zero_shot ? ", zero-shot)" : ")"));
    int i = 0;
    const int n = static_cast<int>(report.recall_at.size());
    for (const auto& [k, v] : report.recall_at) {
        int x0 = kMargin + 40 + i * (kW - 2 * kMargin) / std::max(1, n);
        int barw = 80;
        auto top = map_point(0, 1, v, 100.0);
        cv::rectangle(img, {x0, top.y}, {x0 + barw, kH - kMargin}, palette()[i % 6], cv::FILLED);
        char label[48];
        std::snprintf(label, sizeof(label), "R@%d=%.1f", k, v);
        cv::putText(img, label, {x0, top.y - 8}, cv::FONT_HERSHEY_SIMPLEX, 0.5, {0, 0, 0}, 1);
        ++i;
    }
    save(img, out_path);
}

void plot_confusion(const ClassificationReport& report, const std::string& out_path) {
    cv::Mat img(kH, kW, CV_8UC3);
    img.setTo(cv::Scalar(255, 255, 255));
    auto draw_matrix = [&](const std::array<std::array<int64_t, 5>, 5>& m, int x_off, const char* title) {
        int64_t peak = 1;
        for (const auto& row : m)
            for (int64_t v : row) peak = std::max(peak, v);
        const int cell = 60;
        cv::putText(img, title, {x_off, 40}, cv::FONT_HERSHEY_SIMPLEX, 0.55, {0, 0, 0}, 1);
        for (int r = 0; r < 5; ++r) {
            for (int c = 0; c < 5; ++c) {
                double frac = static_cast<double>(m[r][c]) / static_cast<double>(peak);
                int shade = static_cast<int>(255 - 205 * frac);
                cv::Rect box(x_off + c * cell, 60 + r * cell, cell - 2, cell - 2);
                cv::rectangle(img, box, cv::Scalar(shade, shade, 255), cv::FILLED);
                cv::putText(img, std::to_string(m[r][c]), {box.x + 12, box.y + 35},
                            cv::FONT_HERSHEY_SIMPLEX, 0.5, {0, 0, 0}, 1);
            }
        }
    };
    draw_matrix(report.confusion_sdrg, kMargin, "SDRG confusion (rows=true)");
    draw_matrix(report.confusion_icdr, kW / 2 + 20, "ICDR confusion (rows=true)");
    save(img, out_path);
}

std::vector<EpochRecord> read_history_csv(const std::string& path) {
    auto rows = csv::read_file(path);
    if (rows.size() < 2) throw Error("history CSV has no data rows: " + path);
    std::vector<EpochRecord> out;
    for (size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != 16) throw Error("history CSV row " + std::to_string(r) + " has wrong arity");
        EpochRecord rec;
        rec.epoch = std::stoll(row[0]);
        rec.lr = std::stod(row[1]);
        for (int i = 0; i < 6; ++i) rec.components[i] = std::stod(row[2 + i]);
        for (int i = 0; i < 6; ++i) rec.weights[i] = std::stod(row[8 + i]);
        rec.train_total = std::stod(row[14]);
        rec.val_total = std::stod(row[15]);
        out.push_back(rec);
    }
    return out;
}

} // namespace retfuse

#include "osfd/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "osfd/error.hpp"

namespace osfd {

namespace fs = std::filesystem;

std::string render_report_table(const std::vector<EvalReport>& reports) {
    std::ostringstream os;
    os << "unknown_class  unknown_auroc  tosc     tosc_merged  closed_set_acc\n";
    double sum_auroc = 0.0, sum_tosc = 0.0, sum_merged = 0.0, sum_acc = 0.0;
    for (const EvalReport& r : reports) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-13s  %.4f         %.4f   %.4f       %.4f\n",
                      r.unknown_method.c_str(), r.unknown_auroc, r.tosc_accuracy, r.tosc_merged,
                      r.closed_set_accuracy);
        os << buf;
        sum_auroc += r.unknown_auroc;
        sum_tosc += r.tosc_accuracy;
        sum_merged += r.tosc_merged;
        sum_acc += r.closed_set_accuracy;
    }
    if (!reports.empty()) {
        const double n = static_cast<double>(reports.size());
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-13s  %.4f         %.4f   %.4f       %.4f\n", "mean",
                      sum_auroc / n, sum_tosc / n, sum_merged / n, sum_acc / n);
        os << buf;
    }
    return os.str();
}

namespace {

void draw_line(Image& img, int x0, int y0, int x1, int y1, const float rgb[3]) {
    const int steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0)) + 1;
    for (int s = 0; s <= steps; ++s) {
        const float t = static_cast<float>(s) / steps;
        const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
        const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
        if (x < 0 || x >= img.width || y < 0 || y >= img.height) continue;
        float* px = img.at(y, x);
        px[0] = rgb[0];
        px[1] = rgb[1];
        px[2] = rgb[2];
    }
}

}  // namespace

Image render_lambda_sweep(const EvalReport& report, int side) {
    OSFD_REQUIRE(!report.lambda_sweep_tosc.empty(), "report has no lambda sweep");
    Image img(side, side);
    std::fill(img.px.begin(), img.px.end(), 1.0f);

    const int margin = 40;
    const float axis_color[3] = {0.2f, 0.2f, 0.2f};
    draw_line(img, margin, side - margin, side - margin, side - margin, axis_color);
    draw_line(img, margin, margin, margin, side - margin, axis_color);

    auto to_px = [&](double lambda, double value) {
        const int x = margin + static_cast<int>((lambda / 100.0) * (side - 2 * margin));
        const int y = side - margin - static_cast<int>(value * (side - 2 * margin));
        return std::pair<int, int>(x, y);
    };

    const float tosc_color[3] = {0.12f, 0.47f, 0.71f};
    const float rate_color[3] = {0.84f, 0.15f, 0.16f};
    int prev_x = -1, prev_yt = -1, prev_yr = -1;
    for (const auto& [lambda, value] : report.lambda_sweep_tosc) {
        const auto [x, yt] = to_px(lambda, value);
        const auto [x2, yr] = to_px(lambda, report.lambda_sweep_unknown_rate.at(lambda));
        if (prev_x >= 0) {
            draw_line(img, prev_x, prev_yt, x, yt, tosc_color);
            draw_line(img, prev_x, prev_yr, x2, yr, rate_color);
        }
        prev_x = x;
        prev_yt = yt;
        prev_yr = yr;
    }
    return img;
}

void render_report_directory(const fs::path& dir) {
    OSFD_REQUIRE(fs::exists(dir), "report directory does not exist: ", dir.string());
    std::vector<EvalReport> reports;
    std::vector<fs::path> report_dirs;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().filename() == "report.json") {
            std::ifstream is(entry.path());
            nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
            OSFD_REQUIRE(!j.is_discarded(), "invalid report JSON: ", entry.path().string());
            reports.push_back(EvalReport::from_json(j));
            report_dirs.push_back(entry.path().parent_path());
        }
    }
    OSFD_REQUIRE(!reports.empty(), "no report.json files under ", dir.string());
    std::sort(report_dirs.begin(), report_dirs.end());

    const std::string table = render_report_table(reports);
    std::cout << table;
    std::ofstream os(dir / "summary.txt");
    os << table;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        write_png(report_dirs[i] / "lambda_sweep.png", render_lambda_sweep(reports[i]));
    }
}

}  // namespace osfd

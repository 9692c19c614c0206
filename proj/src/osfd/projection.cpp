#include "osfd/projection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>

#include "osfd/error.hpp"
#include "osfd/rng.hpp"

namespace osfd {

ProjectionMethod projection_method_from_string(const std::string& s) {
    if (s == "TSNE_STYLE" || s == "tsne") return ProjectionMethod::kTsneStyle;
    if (s == "UMAP_STYLE" || s == "umap") return ProjectionMethod::kUmapStyle;
    fail("unknown projection method '", s, "'");
}

std::string to_string(ProjectionMethod m) {
    return m == ProjectionMethod::kTsneStyle ? "TSNE_STYLE" : "UMAP_STYLE";
}

void Projection2D::save_csv(const std::filesystem::path& file) const {
    std::ofstream os(file);
    OSFD_REQUIRE(os.good(), "cannot write projection CSV to ", file.string());
    os << "x,y,label\n";
    for (std::size_t i = 0; i < size(); ++i) {
        os << x[i] << "," << y[i] << "," << labels[i] << "\n";
    }
}

Image Projection2D::render_scatter(int side) const {
    OSFD_REQUIRE(side >= 64, "render_scatter: side too small");
    Image canvas(side, side);
    std::fill(canvas.px.begin(), canvas.px.end(), 1.0f);  // white

    double lo_x = *std::min_element(x.begin(), x.end());
    double hi_x = *std::max_element(x.begin(), x.end());
    double lo_y = *std::min_element(y.begin(), y.end());
    double hi_y = *std::max_element(y.begin(), y.end());
    const double span_x = std::max(hi_x - lo_x, 1e-12);
    const double span_y = std::max(hi_y - lo_y, 1e-12);

    // Fixed palette, assigned to labels in sorted order.
    static const float palette[][3] = {
        {0.12f, 0.47f, 0.71f}, {1.00f, 0.50f, 0.05f}, {0.17f, 0.63f, 0.17f},
        {0.84f, 0.15f, 0.16f}, {0.58f, 0.40f, 0.74f}, {0.55f, 0.34f, 0.29f},
        {0.89f, 0.47f, 0.76f}, {0.50f, 0.50f, 0.50f},
    };
    std::map<std::string, int> color_of;
    for (const auto& l : labels) color_of.emplace(l, 0);
    int next = 0;
    for (auto& [l, c] : color_of) c = next++ % 8;

    const int margin = 12, radius = 2;
    for (std::size_t i = 0; i < size(); ++i) {
        const int px = margin + static_cast<int>((x[i] - lo_x) / span_x * (side - 2 * margin));
        const int py = margin + static_cast<int>((y[i] - lo_y) / span_y * (side - 2 * margin));
        const float* col = palette[color_of[labels[i]]];
        for (int dy = -radius; dy <= radius; ++dy) {
            for (int dx = -radius; dx <= radius; ++dx) {
                const int yy = py + dy, xx = px + dx;
                if (yy < 0 || yy >= side || xx < 0 || xx >= side) continue;
                float* dst = canvas.at(yy, xx);
                dst[0] = col[0];
                dst[1] = col[1];
                dst[2] = col[2];
            }
        }
    }
    return canvas;
}

namespace {

std::vector<double> pairwise_sq_dists(const Tensor& e) {
    const std::int64_t m = e.dim(0), d = e.dim(1);
    std::vector<double> dist(static_cast<std::size_t>(m * m), 0.0);
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = i + 1; j < m; ++j) {
            double acc = 0.0;
            const float* a = e.data() + i * d;
            const float* b = e.data() + j * d;
            for (std::int64_t k = 0; k < d; ++k) {
                const double diff = static_cast<double>(a[k]) - b[k];
                acc += diff * diff;
            }
            dist[static_cast<std::size_t>(i * m + j)] = acc;
            dist[static_cast<std::size_t>(j * m + i)] = acc;
        }
    }
    return dist;
}

/// Row-wise conditional affinities with per-point precision found by binary
/// search to match the target perplexity.
std::vector<double> tsne_affinities(const std::vector<double>& d2, std::int64_t m,
                                    double perplexity) {
    const double target_entropy = std::log(perplexity);
    std::vector<double> p(static_cast<std::size_t>(m * m), 0.0);
    for (std::int64_t i = 0; i < m; ++i) {
        double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
        for (int iter = 0; iter < 64; ++iter) {
            double sum = 0.0, weighted = 0.0;
            for (std::int64_t j = 0; j < m; ++j) {
                if (j == i) continue;
                const double w = std::exp(-d2[static_cast<std::size_t>(i * m + j)] * beta);
                sum += w;
                weighted += w * d2[static_cast<std::size_t>(i * m + j)];
            }
            const double entropy = sum > 0 ? std::log(sum) + beta * weighted / sum : 0.0;
            if (std::abs(entropy - target_entropy) < 1e-5) break;
            if (entropy > target_entropy) {
                beta_lo = beta;
                beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta + beta_hi);
            } else {
                beta_hi = beta;
                beta = 0.5 * (beta + beta_lo);
            }
        }
        double sum = 0.0;
        for (std::int64_t j = 0; j < m; ++j) {
            if (j == i) continue;
            p[static_cast<std::size_t>(i * m + j)] =
                std::exp(-d2[static_cast<std::size_t>(i * m + j)] * beta);
            sum += p[static_cast<std::size_t>(i * m + j)];
        }
        if (sum > 0) {
            for (std::int64_t j = 0; j < m; ++j) p[static_cast<std::size_t>(i * m + j)] /= sum;
        }
    }
    // Symmetrize and normalize to a joint distribution.
    std::vector<double> joint(static_cast<std::size_t>(m * m), 0.0);
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t j = 0; j < m; ++j) {
            joint[static_cast<std::size_t>(i * m + j)] =
                (p[static_cast<std::size_t>(i * m + j)] + p[static_cast<std::size_t>(j * m + i)]) /
                (2.0 * static_cast<double>(m));
        }
    }
    return joint;
}

void tsne_layout(const std::vector<double>& joint, std::int64_t m, Rng& rng,
                 std::vector<double>& ox, std::vector<double>& oy) {
    std::vector<double> px(static_cast<std::size_t>(m)), py(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
        px[static_cast<std::size_t>(i)] = rng.normal() * 1e-2;
        py[static_cast<std::size_t>(i)] = rng.normal() * 1e-2;
    }
    std::vector<double> vx(static_cast<std::size_t>(m), 0.0), vy(static_cast<std::size_t>(m), 0.0);
    std::vector<double> gx(static_cast<std::size_t>(m)), gy(static_cast<std::size_t>(m));
    std::vector<double> q(static_cast<std::size_t>(m * m));

    const int iters = 400;
    const double lr = 80.0;
    for (int it = 0; it < iters; ++it) {
        const double exaggeration = it < 100 ? 12.0 : 1.0;
        const double momentum = it < 200 ? 0.5 : 0.8;
        double qsum = 0.0;
        for (std::int64_t i = 0; i < m; ++i) {
            for (std::int64_t j = i + 1; j < m; ++j) {
                const double dx = px[static_cast<std::size_t>(i)] - px[static_cast<std::size_t>(j)];
                const double dy = py[static_cast<std::size_t>(i)] - py[static_cast<std::size_t>(j)];
                const double w = 1.0 / (1.0 + dx * dx + dy * dy);
                q[static_cast<std::size_t>(i * m + j)] = w;
                q[static_cast<std::size_t>(j * m + i)] = w;
                qsum += 2.0 * w;
            }
        }
        std::fill(gx.begin(), gx.end(), 0.0);
        std::fill(gy.begin(), gy.end(), 0.0);
        for (std::int64_t i = 0; i < m; ++i) {
            for (std::int64_t j = 0; j < m; ++j) {
                if (i == j) continue;
                const double w = q[static_cast<std::size_t>(i * m + j)];
                const double coeff =
                    4.0 * (exaggeration * joint[static_cast<std::size_t>(i * m + j)] - w / qsum) * w;
                gx[static_cast<std::size_t>(i)] +=
                    coeff * (px[static_cast<std::size_t>(i)] - px[static_cast<std::size_t>(j)]);
                gy[static_cast<std::size_t>(i)] +=
                    coeff * (py[static_cast<std::size_t>(i)] - py[static_cast<std::size_t>(j)]);
            }
        }
        for (std::int64_t i = 0; i < m; ++i) {
            vx[static_cast<std::size_t>(i)] = momentum * vx[static_cast<std::size_t>(i)] - lr * gx[static_cast<std::size_t>(i)];
            vy[static_cast<std::size_t>(i)] = momentum * vy[static_cast<std::size_t>(i)] - lr * gy[static_cast<std::size_t>(i)];
            px[static_cast<std::size_t>(i)] += vx[static_cast<std::size_t>(i)];
            py[static_cast<std::size_t>(i)] += vy[static_cast<std::size_t>(i)];
        }
    }
    ox = std::move(px);
    oy = std::move(py);
}

void umap_layout(const std::vector<double>& d2, std::int64_t m, Rng& rng,
                 std::vector<double>& ox, std::vector<double>& oy) {
    const int k = static_cast<int>(std::min<std::int64_t>(10, m - 1));
    // kNN with per-point fuzzy weights exp(-(d - rho)/sigma), sigma tuned so
    // the weights sum to log2(k).
    struct Edge {
        int a, b;
        double w;
    };
    std::vector<Edge> edges;
    for (std::int64_t i = 0; i < m; ++i) {
        std::vector<std::pair<double, int>> nn;
        for (std::int64_t j = 0; j < m; ++j) {
            if (j != i) nn.push_back({std::sqrt(d2[static_cast<std::size_t>(i * m + j)]), static_cast<int>(j)});
        }
        std::partial_sort(nn.begin(), nn.begin() + k, nn.end());
        const double rho = nn[0].first;
        double sig_lo = 1e-6, sig_hi = 100.0;
        double sigma = 1.0;
        const double target = std::log2(static_cast<double>(k));
        for (int it = 0; it < 48; ++it) {
            sigma = 0.5 * (sig_lo + sig_hi);
            double s = 0.0;
            for (int j = 0; j < k; ++j) s += std::exp(-std::max(0.0, nn[static_cast<std::size_t>(j)].first - rho) / sigma);
            if (s > target) sig_hi = sigma; else sig_lo = sigma;
        }
        for (int j = 0; j < k; ++j) {
            const double w = std::exp(-std::max(0.0, nn[static_cast<std::size_t>(j)].first - rho) / sigma);
            edges.push_back({static_cast<int>(i), nn[static_cast<std::size_t>(j)].second, w});
        }
    }

    std::vector<double> px(static_cast<std::size_t>(m)), py(static_cast<std::size_t>(m));
    for (std::int64_t i = 0; i < m; ++i) {
        px[static_cast<std::size_t>(i)] = rng.uniform(-5.0, 5.0);
        py[static_cast<std::size_t>(i)] = rng.uniform(-5.0, 5.0);
    }

    const int epochs = 200;
    const int negatives = 4;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        const double alpha = 1.0 * (1.0 - static_cast<double>(epoch) / epochs);
        for (const Edge& e : edges) {
            if (!rng.chance(e.w)) continue;
            // Attraction along the edge.
            double dx = px[static_cast<std::size_t>(e.a)] - px[static_cast<std::size_t>(e.b)];
            double dy = py[static_cast<std::size_t>(e.a)] - py[static_cast<std::size_t>(e.b)];
            double d2e = dx * dx + dy * dy;
            double coeff = -2.0 * d2e / ((1.0 + d2e) * (d2e + 1e-3));
            const double ax = std::clamp(coeff * dx, -4.0, 4.0) * alpha;
            const double ay = std::clamp(coeff * dy, -4.0, 4.0) * alpha;
            px[static_cast<std::size_t>(e.a)] += ax;
            py[static_cast<std::size_t>(e.a)] += ay;
            px[static_cast<std::size_t>(e.b)] -= ax;
            py[static_cast<std::size_t>(e.b)] -= ay;
            // Repulsion against sampled non-neighbors.
            for (int neg = 0; neg < negatives; ++neg) {
                const int other = static_cast<int>(rng.uniform_int(0, m - 1));
                if (other == e.a) continue;
                dx = px[static_cast<std::size_t>(e.a)] - px[static_cast<std::size_t>(other)];
                dy = py[static_cast<std::size_t>(e.a)] - py[static_cast<std::size_t>(other)];
                d2e = dx * dx + dy * dy;
                coeff = 2.0 / ((0.1 + d2e) * (1.0 + d2e));
                px[static_cast<std::size_t>(e.a)] += std::clamp(coeff * dx, -4.0, 4.0) * alpha;
                py[static_cast<std::size_t>(e.a)] += std::clamp(coeff * dy, -4.0, 4.0) * alpha;
            }
        }
    }
    ox = std::move(px);
    oy = std::move(py);
}

}  // namespace

Projection2D project_embeddings(const Tensor& embeddings, const std::vector<std::string>& labels,
                                ProjectionMethod method, std::uint64_t seed) {
    OSFD_REQUIRE(embeddings.ndim() == 2, "project_embeddings expects [M,D], got ",
                 embeddings.shape_str());
    const std::int64_t m = embeddings.dim(0);
    OSFD_REQUIRE(m >= 10, "project_embeddings needs at least 10 points, got ", m);
    OSFD_REQUIRE(static_cast<std::int64_t>(labels.size()) == m, "labels length mismatch");
    OSFD_REQUIRE(embeddings.all_finite(), "project_embeddings: non-finite input");

    Projection2D out;
    out.labels = labels;
    out.method = method;

    Tensor points = embeddings;
    std::vector<double> d2 = pairwise_sq_dists(points);
    const double max_d2 = *std::max_element(d2.begin(), d2.end());
    if (max_d2 < 1e-18) {
        // All embeddings identical: no geometry to lay out.
        std::cerr << "warning: identical embeddings; jittering before projection\n";
        Rng jrng(derive_seed(seed, "jitter"));
        for (std::int64_t i = 0; i < points.numel(); ++i) {
            points[i] += static_cast<float>(jrng.normal() * 1e-3);
        }
        d2 = pairwise_sq_dists(points);
        out.jittered = true;
    }

    Rng rng(derive_seed(seed, "layout"));
    if (method == ProjectionMethod::kTsneStyle) {
        const double perplexity = std::min(15.0, static_cast<double>(m - 1) / 3.0);
        const auto joint = tsne_affinities(d2, m, perplexity);
        tsne_layout(joint, m, rng, out.x, out.y);
    } else {
        umap_layout(d2, m, rng, out.x, out.y);
    }
    for (std::size_t i = 0; i < out.x.size(); ++i) {
        OSFD_REQUIRE(std::isfinite(out.x[i]) && std::isfinite(out.y[i]),
                     "projection produced non-finite coordinates");
    }
    return out;
}

}  // namespace osfd

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "osfd/image.hpp"
#include "osfd/tensor.hpp"

namespace osfd {

enum class ProjectionMethod { kTsneStyle, kUmapStyle };

ProjectionMethod projection_method_from_string(const std::string& s);
std::string to_string(ProjectionMethod m);

/// 2D layout of embedded samples, one point per row of the input.
struct Projection2D {
    std::vector<double> x;  // length M
    std::vector<double> y;
    std::vector<std::string> labels;
    ProjectionMethod method = ProjectionMethod::kTsneStyle;
    bool jittered = false;  // degenerate input was perturbed

    std::size_t size() const { return x.size(); }

    void save_csv(const std::filesystem::path& file) const;
    /// Scatter render; one fixed color per distinct label.
    Image render_scatter(int side = 512) const;
};

/// Neighbor-embedding layout of [M, D] embeddings. TSNE_STYLE runs exact
/// stochastic-neighbor embedding; UMAP_STYLE runs a fuzzy-kNN-graph
/// attraction/repulsion layout. Both are deterministic per seed. Requires
/// M >= 10; identical embeddings are jittered with a warning flag.
Projection2D project_embeddings(const Tensor& embeddings, const std::vector<std::string>& labels,
                                ProjectionMethod method, std::uint64_t seed);

}  // namespace osfd

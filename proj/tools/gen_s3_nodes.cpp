// Regenerates data/s3_base_nodes.txt and data/s3_base_tets.txt.
#include <CLI11.hpp>
#include <iostream>

#include "esl/sampling.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate the symmetric S^3 base design and its triangulation"};
    int pairs = 1821;
    std::uint64_t seed = 20230615;
    int iters = 300;
    std::string out_dir = "data";
    app.add_option("--pairs", pairs, "antipodal pairs");
    app.add_option("--seed", seed);
    app.add_option("--iters", iters, "energy descent iterations");
    app.add_option("--out-dir", out_dir);
    CLI11_PARSE(app, argc, argv);

    auto nodes = esl::generate_symmetric_s3_nodes(pairs, seed, iters);
    std::vector<Eigen::Vector4d> sym(nodes);
    for (const auto& q : nodes) sym.push_back(-q);
    auto tets = esl::convex_hull_s3(sym);
    auto tri = esl::make_symmetric_triangulation(nodes, tets);
    auto e = esl::euler_characteristic(tri);
    std::vector<esl::Rotation> rots;
    for (const auto& q : nodes) rots.emplace_back(q);
    auto st = esl::spacing_stats(esl::nearest_neighbour_distances(rots));
    std::cout << "nodes " << nodes.size() << " tets " << tets.size() << " V-E+F-T " << (e.V - e.E + e.F - e.T)
              << " F-2T " << (e.F - 2 * e.T) << " nn mean " << st.mean << " cv " << st.cv() << '\n';
    if (!e.ok()) {
        std::cerr << "triangulation is not a closed 3-manifold\n";
        return 1;
    }
    esl::save_base_nodes(std::filesystem::path(out_dir) / "s3_base_nodes.txt", nodes);
    esl::save_tets(std::filesystem::path(out_dir) / "s3_base_tets.txt", tets);
    return 0;
}

#include "morpholander/terrain.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace morpho;

TEST_CASE("bilinear interpolation reproduces a plane exactly") {
    Eigen::MatrixXd h(4, 5);
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 5; ++c) h(r, c) = 0.1 + 0.3 * (c * 0.5) - 0.2 * (r * 0.5);
    }
    const Terrain t(0.0, 0.0, 0.5, h);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ux(0.0, 2.0);
    std::uniform_real_distribution<double> uy(0.0, 1.5);
    for (int i = 0; i < 1000; ++i) {
        const double x = ux(rng);
        const double y = uy(rng);
        REQUIRE(t.height(x, y) == doctest::Approx(0.1 + 0.3 * x - 0.2 * y).epsilon(1e-12));
    }
    CHECK(t.height(2.0, 1.5) == doctest::Approx(h(3, 4)));
    CHECK_THROWS_AS(t.height(2.1, 0.0), ConfigError);
}

TEST_CASE("bilinear midpoint of a cell is the corner average") {
    Eigen::MatrixXd h(2, 2);
    h << 0.0, 1.0, 2.0, 5.0;
    const Terrain t(-1.0, -1.0, 2.0, h);
    CHECK(t.height(0.0, 0.0) == doctest::Approx(2.0));
    CHECK(t.height(-1.0, 1.0) == doctest::Approx(2.0));
}

TEST_CASE("grid text parses with headers and centres by default") {
    const Terrain a = Terrain::parse("# cell_size 0.5\n0 0 0\n0 1 0\n0 0 0\n");
    CHECK(a.cell_size() == 0.5);
    CHECK(a.min_x() == doctest::Approx(-0.5));
    CHECK(a.height(0.0, 0.0) == doctest::Approx(1.0));
    const Terrain b = Terrain::parse("# cell_size 1\n# origin 2 3\n0 1\n2 3\n");
    CHECK(b.height(2.5, 3.5) == doctest::Approx(1.5));
}

TEST_CASE("malformed grid names the line") {
    try {
        Terrain::parse("0 0 0\n0 x 0\n");
        FAIL("expected a parse error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(Terrain::parse("0 0\n0 0 0\n"), ConfigError);
    CHECK_THROWS_AS(Terrain::parse("0 0\n"), ConfigError);
}

TEST_CASE("save and load round trip exactly") {
    Terrain t = Terrain::flat(0.3, 0.01);
    t.add_block(0.1, -0.05, 0.03, 1.0 / 30.0);
    const auto path = (std::filesystem::temp_directory_path() / "morpholander-terrain-roundtrip.txt").string();
    t.save(path);
    const Terrain u = Terrain::load(path);
    std::filesystem::remove(path);
    CHECK(u.heights() == t.heights());
    CHECK(u.min_x() == t.min_x());
    CHECK(u.cell_size() == t.cell_size());
}

TEST_CASE("foot blocks sit under the listed feet with bounded heights") {
    const std::array<Vec3, 2> feet{Vec3(0.2, 0.2, 0.0), Vec3(-0.2, -0.2, 0.0)};
    FootBlockSpec spec;
    for (unsigned seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(seed);
        std::array<double, 2> heights{};
        const Terrain t = make_foot_block_terrain(feet, spec, rng, heights);
        for (int i = 0; i < 2; ++i) {
            REQUIRE(heights[i] >= 0.0);
            REQUIRE(heights[i] <= spec.max_step);
            REQUIRE(t.height(feet[i].x(), feet[i].y()) == doctest::Approx(heights[i]));
            REQUIRE(t.height(feet[i].x() + 0.04, feet[i].y() - 0.04) == doctest::Approx(heights[i]));
        }
        REQUIRE(t.height(0.0, 0.0) == 0.0);
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

#include "isearch/clustering.hpp"
#include "isearch/dataset.hpp"
#include "isearch/error.hpp"

using namespace isearch;

namespace {

double lcg_unit(std::uint64_t& s) {
    s = s * 6364136223846793005ull + 1442695040888963407ull;
    return static_cast<double>(s >> 11) / 9007199254740992.0;
}

Dataset two_blobs_2d(std::size_t per_blob, std::uint64_t seed = 7) {
    Dataset d(2);
    std::uint64_t s = seed;
    for (std::size_t i = 0; i < per_blob; ++i) {
        const double row[2] = {0.2 + 0.04 * (lcg_unit(s) - 0.5),
                               0.2 + 0.04 * (lcg_unit(s) - 0.5)};
        d.add_row(row);
    }
    for (std::size_t i = 0; i < per_blob; ++i) {
        const double row[2] = {0.8 + 0.04 * (lcg_unit(s) - 0.5),
                               0.8 + 0.04 * (lcg_unit(s) - 0.5)};
        d.add_row(row);
    }
    return d;
}

}

TEST_CASE("dataset rows are validated") {
    Dataset d(2);
    const double ok[2] = {1.0, 2.0};
    d.add_row(ok);
    const double short_row[1] = {1.0};
    CHECK_THROWS_AS(d.add_row(short_row), DataError);
    const double bad[2] = {1.0, std::nan("")};
    CHECK_THROWS_AS(d.add_row(bad), DataError);
    CHECK(d.size() == 1);
    CHECK(d.dim() == 2);
}

TEST_CASE("normalization maps each dimension onto [0, 1]") {
    const auto d = Dataset::from_rows({{1.0}, {2.0}, {3.0}});
    auto [norm, map] = normalize(d);
    CHECK(norm(0, 0) == 0.0);
    CHECK(norm(1, 0) == 0.5);
    CHECK(norm(2, 0) == 1.0);
    CHECK(map.dims[0].min == 1.0);
    CHECK(map.dims[0].max == 3.0);

    SUBCASE("already normalized data is unchanged") {
        auto [again, map2] = normalize(norm);
        for (std::size_t i = 0; i < 3; ++i) CHECK(again(i, 0) == norm(i, 0));
        (void)map2;
    }
}

TEST_CASE("degenerate dimensions normalize to 0 and invert to the constant") {
    const auto d = Dataset::from_rows({{5.0, 1.0}, {5.0, 2.0}});
    auto [norm, map] = normalize(d);
    CHECK(map.degenerate(0));
    CHECK_FALSE(map.degenerate(1));
    CHECK(norm(0, 0) == 0.0);
    CHECK(norm(1, 0) == 0.0);
    const auto back = map.invert(norm);
    CHECK(back(0, 0) == 5.0);
    CHECK(back(1, 0) == 5.0);
    CHECK(back(0, 1) == doctest::Approx(1.0));
    CHECK(back(1, 1) == doctest::Approx(2.0));
}

TEST_CASE("normalization round-trips points") {
    const auto d = Dataset::from_rows({{-3.0, 10.0}, {4.5, 12.5}, {0.25, 11.0}});
    const auto map = fit_normalization(d);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto p = map.invert(map.apply(d.row(i)));
        for (std::size_t j = 0; j < d.dim(); ++j)
            CHECK(p[j] == doctest::Approx(d(i, j)).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto q = map.apply(d.row(i));
        for (const double v : q) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("normalizing an empty dataset fails") {
    CHECK_THROWS_AS(fit_normalization(Dataset(3)), DataError);
}

TEST_CASE("potential of a lone point is exactly one") {
    const auto d = Dataset::from_rows({{0.4}});
    const auto state = initial_potentials(d, {});
    REQUIRE(state.potentials.size() == 1);
    CHECK(state.potentials[0] == 1.0);
    CHECK(state.iteration == 1);
}

TEST_CASE("coincident points double each other's potential exactly") {
    const auto d = Dataset::from_rows({{0.3, 0.3}, {0.3, 0.3}});
    const auto state = initial_potentials(d, {});
    CHECK(state.potentials[0] == 2.0);
    CHECK(state.potentials[1] == 2.0);
}

TEST_CASE("pair potential matches the closed form") {
    // Distance 0.25 at radius 0.5: the cross term is exp(-0.0625/0.0625).
    const auto d = Dataset::from_rows({{0.0}, {0.25}});
    ClusterParams params;
    params.cluster_radius = 0.5;
    const auto state = initial_potentials(d, params);
    const double expected = 1.0 + std::exp(-1.0);
    CHECK(state.potentials[0] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(state.potentials[1] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("potentials are identical no matter how many threads compute them") {
    Dataset d(3);
    std::uint64_t s = 99;
    for (int i = 0; i < 100; ++i) {
        const double row[3] = {lcg_unit(s), lcg_unit(s), lcg_unit(s)};
        d.add_row(row);
    }
    const auto one = initial_potentials(d, {}, 1);
    const auto four = initial_potentials(d, {}, 4);
    const auto nine = initial_potentials(d, {}, 9);
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(one.potentials[i] == four.potentials[i]);
        CHECK(one.potentials[i] == nine.potentials[i]);
    }
}

TEST_CASE("removing a center leaves it with exactly zero potential") {
    const auto d = Dataset::from_rows({{0.0}, {0.25}});
    ClusterParams params;
    params.cluster_radius = 0.5;
    params.quash_factor = 1.25;
    auto state = initial_potentials(d, params);
    subtract_center(state, 0, d, params);

    CHECK(state.potentials[0] == 0.0);
    // The neighbour keeps (1+e^-1)(1-e^-0.64): its cross distance 0.0625
    // against the widened kernel denom (0.5*1.25/2)^2 = 0.09765625.
    const double expected = (1.0 + std::exp(-1.0)) * (1.0 - std::exp(-0.64));
    CHECK(state.potentials[1] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(state.iteration == 2);
}

TEST_CASE("removing a center barely touches far points") {
    const auto d = Dataset::from_rows({{0.0}, {1.0}});
    ClusterParams params;
    params.cluster_radius = 0.1;
    auto state = initial_potentials(d, params);
    const double before = state.potentials[1];
    subtract_center(state, 0, d, params);
    CHECK(state.potentials[1] == doctest::Approx(before).epsilon(1e-15));
}

TEST_CASE("subtracting with a bad index or mismatched state fails") {
    const auto d = Dataset::from_rows({{0.0}, {1.0}});
    auto state = initial_potentials(d, {});
    CHECK_THROWS_AS(subtract_center(state, 5, d, {}), std::out_of_range);
    const auto other = Dataset::from_rows({{0.0}});
    CHECK_THROWS_AS(subtract_center(state, 0, other, {}), Error);
}

TEST_CASE("parameter validation rejects out-of-range settings") {
    ClusterParams p;
    CHECK_NOTHROW(p.validate());
    p.cluster_radius = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.accept_ratio = 1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.reject_ratio = 0.7; // above accept_ratio
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.quash_factor = -1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("a single row clusters to itself") {
    const auto d = Dataset::from_rows({{42.0, 7.0}});
    const auto model = cluster(d, {});
    REQUIRE(model.cluster_count() == 1);
    CHECK(model.centers(0, 0) == 42.0);
    CHECK(model.centers(0, 1) == 7.0);
    CHECK(model.assignment == std::vector<std::size_t>{0});
}

TEST_CASE("coincident points collapse into a single center") {
    const auto d =
        Dataset::from_rows({{0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}});
    const auto sel = select_centers(d, {});
    REQUIRE(sel.center_indices.size() == 1);
    CHECK(sel.center_indices[0] == 0); // tie on potential keeps the lowest index
}

TEST_CASE("two nearby points yield one center, two far points two") {
    ClusterParams params;
    params.cluster_radius = 0.5;

    const auto near = Dataset::from_rows({{0.0}, {0.25}});
    const auto sel_near = select_centers(near, params);
    REQUIRE(sel_near.center_indices.size() == 1);
    CHECK(sel_near.center_indices[0] == 0);

    const auto far = Dataset::from_rows({{0.0}, {0.9}});
    const auto sel_far = select_centers(far, params);
    REQUIRE(sel_far.center_indices.size() == 2);
    CHECK(sel_far.center_indices[0] == 0);
    CHECK(sel_far.center_indices[1] == 1);
}

TEST_CASE("two well-separated blobs produce one center each") {
    const auto d = two_blobs_2d(20);
    const auto sel = select_centers(d, {});
    REQUIRE(sel.center_indices.size() == 2);
    const bool a_low = sel.center_indices[0] < 20;
    const bool b_low = sel.center_indices[1] < 20;
    CHECK(a_low != b_low);

    SUBCASE("the first center is the global potential peak") {
        const auto state = initial_potentials(d, {});
        std::size_t best = 0;
        for (std::size_t i = 1; i < state.potentials.size(); ++i)
            if (state.potentials[i] > state.potentials[best]) best = i;
        CHECK(sel.center_indices[0] == best);
    }

    SUBCASE("max_centers caps the selection") {
        ClusterParams capped;
        capped.max_centers = 1;
        const auto sel1 = select_centers(d, capped);
        CHECK(sel1.center_indices.size() == 1);
        CHECK(sel1.center_indices[0] == sel.center_indices[0]);
    }
}

TEST_CASE("reordering the points does not change the chosen centers") {
    const auto d = two_blobs_2d(15, 21);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < d.size(); ++i)
        rows.emplace_back(d.row(i).begin(), d.row(i).end());
    auto reversed_rows = rows;
    std::reverse(reversed_rows.begin(), reversed_rows.end());
    const auto reversed = Dataset::from_rows(reversed_rows);

    SUBCASE("potentials are permuted along with the points") {
        const auto p = initial_potentials(d, {}).potentials;
        auto q = initial_potentials(reversed, {}).potentials;
        std::reverse(q.begin(), q.end());
        for (std::size_t i = 0; i < p.size(); ++i)
            CHECK(p[i] == doctest::Approx(q[i]).epsilon(1e-12));
    }

    const auto sel_a = select_centers(d, {});
    const auto sel_b = select_centers(reversed, {});
    REQUIRE(sel_a.center_indices.size() == sel_b.center_indices.size());

    auto points_of = [](const Dataset& data, const std::vector<std::size_t>& idx) {
        std::set<std::vector<double>> out;
        for (std::size_t i : idx)
            out.insert(std::vector<double>(data.row(i).begin(), data.row(i).end()));
        return out;
    };
    CHECK(points_of(d, sel_a.center_indices) == points_of(reversed, sel_b.center_indices));
}

TEST_CASE("scaling every potential by a constant changes nothing") {
    const auto d = two_blobs_2d(12, 43);
    ClusterParams params;
    const auto base = initial_potentials(d, params);
    const auto reference = select_centers_from(base, d, params);
    for (const double k : {2.0, 3.7, 0.25}) {
        auto scaled = base;
        for (double& p : scaled.potentials) p *= k;
        const auto sel = select_centers_from(scaled, d, params);
        CHECK(sel.center_indices == reference.center_indices);
    }
}

TEST_CASE("assignment picks the nearest center, ties to the lowest index") {
    const auto centers = Dataset::from_rows({{0.0}, {1.0}});
    const auto points = Dataset::from_rows({{0.1}, {0.6}, {0.5}});
    const auto a = assign(points, centers);
    CHECK(a == std::vector<std::size_t>{0, 1, 0});
}

TEST_CASE("assignment rejects missing centers and dimension mismatches") {
    const auto points = Dataset::from_rows({{0.1}});
    CHECK_THROWS_AS(assign(points, Dataset(1)), Error);
    const auto centers = Dataset::from_rows({{0.1, 0.2}});
    CHECK_THROWS_AS(assign(points, centers), Error);
}

TEST_CASE("end-to-end clustering recovers two blobs in original units") {
    Dataset d(2);
    std::uint64_t s = 5;
    for (int i = 0; i < 30; ++i) {
        const double row[2] = {25.0 + 2.0 * (lcg_unit(s) - 0.5),
                               30000.0 + 2000.0 * (lcg_unit(s) - 0.5)};
        d.add_row(row);
    }
    for (int i = 0; i < 30; ++i) {
        const double row[2] = {45.0 + 2.0 * (lcg_unit(s) - 0.5),
                               70000.0 + 2000.0 * (lcg_unit(s) - 0.5)};
        d.add_row(row);
    }
    const auto model = cluster(d, {});
    REQUIRE(model.cluster_count() == 2);
    CHECK(model.assignment.size() == d.size());

    // Each center's own point belongs to the cluster it defines.
    for (std::size_t c = 0; c < model.cluster_count(); ++c)
        CHECK(model.assignment[model.center_indices[c]] == c);

    // Each center is one of the input points, recovered in original units.
    for (std::size_t c = 0; c < model.cluster_count(); ++c) {
        const auto original = d.row(model.center_indices[c]);
        for (std::size_t j = 0; j < d.dim(); ++j)
            CHECK(model.centers(c, j) == doctest::Approx(original[j]).epsilon(1e-9));
    }

    auto sizes = model.cluster_sizes();
    REQUIRE(sizes.size() == 2);
    CHECK(sizes[0] + sizes[1] == d.size());
    CHECK(sizes[0] == 30);
    CHECK(sizes[1] == 30);

    // Both blobs are internally consistent.
    for (std::size_t i = 1; i < 30; ++i) CHECK(model.assignment[i] == model.assignment[0]);
    for (std::size_t i = 31; i < 60; ++i) CHECK(model.assignment[i] == model.assignment[30]);
    CHECK(model.assignment[0] != model.assignment[30]);
}

#include <doctest.h>

#include <algorithm>
#include <vector>

#include "nodulekit/consensus.hpp"
#include "nodulekit/rng.hpp"

using namespace nodulekit;

namespace {

// Brute-force pixel membership oracle: exact on-segment test plus an even-odd
// count along a *vertical* ray, the opposite axis from the implementation's
// horizontal ray. Integer arithmetic throughout.
bool oracle_pixel_in_polygon(int px, int py, const std::vector<std::pair<int, int>>& poly) {
    const std::size_t n = poly.size();
    if (n == 1) return px == poly[0].first && py == poly[0].second;
    // boundary
    for (std::size_t i = 0; i < n; ++i) {
        const auto [x1, y1] = poly[i];
        const auto [x2, y2] = poly[(i + 1) % n];
        const long long cross = static_cast<long long>(x2 - x1) * (py - y1) -
                                static_cast<long long>(y2 - y1) * (px - x1);
        if (cross == 0 && px >= std::min(x1, x2) && px <= std::max(x1, x2) &&
            py >= std::min(y1, y2) && py <= std::max(y1, y2))
            return true;
    }
    // interior: upward ray from (px, py); half-open rule on x, edge height at
    // px compared exactly. py > eta(px) <=> (y1-py)(x2-x1) + (px-x1)(y2-y1)
    // has the sign of (x2-x1) flipped.
    int crossings = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto [x1, y1] = poly[i];
        const auto [x2, y2] = poly[(i + 1) % n];
        if ((x1 > px) == (x2 > px)) continue;
        const long long expr = static_cast<long long>(y1 - py) * (x2 - x1) +
                               static_cast<long long>(px - x1) * (y2 - y1);
        const bool above = (x2 - x1) > 0 ? expr > 0 : expr < 0;
        if (above) ++crossings;
    }
    return crossings % 2 == 1;
}

Mask3D cube_mask(const Dims& dims, int x0, int y0, int z0, int r) {
    Mask3D m(dims);
    for (int z = z0 - r; z <= z0 + r; ++z)
        for (int y = y0 - r; y <= y0 + r; ++y)
            for (int x = x0 - r; x <= x0 + r; ++x)
                if (dims.contains(x, y, z)) m.set(x, y, z);
    return m;
}

ConsensusNodule make_nodule(const std::string& uid, const std::string& patient, int rating) {
    ConsensusNodule n;
    n.nodule_uid = uid;
    n.patient_id = patient;
    n.rating = rating;
    return n;
}

}  // namespace

TEST_SUITE("consensus") {

TEST_CASE("axis-aligned square fills 25 pixels") {
    const Mask2D m = rasterize_roi({{0, 0}, {0, 4}, {4, 4}, {4, 0}}, 8, 8);
    CHECK(m.count() == 25);
    for (int y = 0; y <= 4; ++y)
        for (int x = 0; x <= 4; ++x) CHECK(m.test(x, y));
}

TEST_CASE("single vertex marks exactly one pixel") {
    const Mask2D m = rasterize_roi({{3, 5}}, 8, 8);
    CHECK(m.count() == 1);
    CHECK(m.test(3, 5));
}

TEST_CASE("concave L-shape matches the per-pixel oracle") {
    const std::vector<std::pair<int, int>> poly = {{0, 0}, {6, 0}, {6, 2}, {2, 2}, {2, 6}, {0, 6}};
    const Mask2D m = rasterize_roi(poly, 10, 10);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x)
            CHECK(m.test(x, y) == oracle_pixel_in_polygon(x, y, poly));
}

TEST_CASE("random polygons match the per-pixel oracle") {
    Rng rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        std::vector<std::pair<int, int>> poly;
        const int n = 3 + static_cast<int>(rng.uniform_int(6));
        for (int i = 0; i < n; ++i)
            poly.emplace_back(static_cast<int>(rng.uniform_int(12)),
                              static_cast<int>(rng.uniform_int(12)));
        const Mask2D m = rasterize_roi(poly, 12, 12);
        for (int y = 0; y < 12; ++y)
            for (int x = 0; x < 12; ++x)
                CHECK(m.test(x, y) == oracle_pixel_in_polygon(x, y, poly));
    }
}

TEST_CASE("empty polygon is rejected") {
    CHECK_THROWS_AS(rasterize_roi({}, 4, 4), EmptyPolygon);
}

TEST_CASE("grouping: identical, disjoint, and transitive overlap") {
    const Dims dims{16, 16, 4};
    std::vector<RasterizedReading> readings;
    readings.push_back({0, "a", 3, cube_mask(dims, 4, 4, 1, 1)});
    readings.push_back({1, "b", 3, cube_mask(dims, 4, 4, 1, 1)});
    auto groups = group_readings(readings);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].size() == 2);

    readings.clear();
    readings.push_back({0, "a", 3, cube_mask(dims, 3, 3, 1, 1)});
    readings.push_back({0, "b", 3, cube_mask(dims, 12, 12, 2, 1)});
    groups = group_readings(readings);
    CHECK(groups.size() == 2);

    // A meets B, B meets C, A misses C -> one group of three
    readings.clear();
    readings.push_back({0, "A", 3, cube_mask(dims, 3, 8, 1, 1)});
    readings.push_back({1, "B", 3, cube_mask(dims, 5, 8, 1, 1)});
    readings.push_back({2, "C", 3, cube_mask(dims, 7, 8, 1, 1)});
    CHECK(readings[0].mask.intersects(readings[1].mask));
    CHECK(readings[1].mask.intersects(readings[2].mask));
    CHECK(!readings[0].mask.intersects(readings[2].mask));
    groups = group_readings(readings);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].size() == 3);
}

TEST_CASE("grouping partition matches a union-find oracle on random masks") {
    Rng rng(31);
    const Dims dims{10, 10, 2};
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<RasterizedReading> readings;
        const int k = 2 + static_cast<int>(rng.uniform_int(4));
        for (int i = 0; i < k; ++i)
            readings.push_back({0, std::to_string(i), 3,
                                cube_mask(dims, 1 + static_cast<int>(rng.uniform_int(8)),
                                          1 + static_cast<int>(rng.uniform_int(8)), 0,
                                          static_cast<int>(rng.uniform_int(2)))});

        // oracle: repeated relaxation over the overlap graph
        std::vector<int> comp(k);
        for (int i = 0; i < k; ++i) comp[i] = i;
        for (bool changed = true; changed;) {
            changed = false;
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j)
                    if (readings[i].mask.intersects(readings[j].mask) && comp[j] < comp[i]) {
                        comp[i] = comp[j];
                        changed = true;
                    }
        }
        const auto groups = group_readings(readings);
        std::vector<int> got(k, -1);
        for (std::size_t g = 0; g < groups.size(); ++g)
            for (const std::size_t idx : groups[g]) got[idx] = static_cast<int>(g);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                CHECK((comp[i] == comp[j]) == (got[i] == got[j]));
    }
}

TEST_CASE("consensus mask inclusive 50% rule") {
    const Dims dims{4, 4, 1};
    Mask3D a(dims), b(dims), c(dims);
    a.set(0, 0, 0);
    b.set(1, 1, 0);
    c.set(0, 0, 0);

    // one member: consensus equals the member
    Mask3D one = consensus_mask({&a});
    CHECK(one.voxel_count() == 1);
    CHECK(one.test(0, 0, 0));

    // voxel in 1 of 2 members: included (50% inclusive)
    Mask3D two = consensus_mask({&a, &b});
    CHECK(two.test(0, 0, 0));
    CHECK(two.test(1, 1, 0));

    // voxel in 1 of 3 members: excluded
    Mask3D three = consensus_mask({&a, &b, &c});
    CHECK(three.test(0, 0, 0));   // 2/3
    CHECK(!three.test(1, 1, 0));  // 1/3
}

TEST_CASE("consensus mask matches brute-force voting for all member patterns") {
    // every possible per-voxel membership pattern for 1..4 members on a
    // 4x4x1 grid (16 voxels hold all 2^k patterns)
    const Dims dims{4, 4, 1};
    for (int k = 1; k <= 4; ++k) {
        std::vector<Mask3D> members(k, Mask3D(dims));
        for (int pattern = 0; pattern < (1 << k); ++pattern) {
            const int x = pattern % 4, y = pattern / 4;
            for (int m = 0; m < k; ++m)
                if ((pattern >> m) & 1) members[m].set(x, y, 0);
        }
        std::vector<const Mask3D*> ptrs;
        for (auto& m : members) ptrs.push_back(&m);
        const Mask3D result = consensus_mask(ptrs);
        for (int pattern = 0; pattern < (1 << k); ++pattern) {
            const int x = pattern % 4, y = pattern / 4;
            int votes = 0;
            for (int m = 0; m < k; ++m) votes += (pattern >> m) & 1;
            CHECK(result.test(x, y, 0) == (2 * votes >= k));
        }
    }
}

TEST_CASE("consensus mask is monotone in added members") {
    Rng rng(77);
    const Dims dims{4, 4, 1};
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 1 + static_cast<int>(rng.uniform_int(3));
        std::vector<Mask3D> members(k + 1, Mask3D(dims));
        for (int m = 0; m <= k; ++m)
            for (int i = 0; i < 16; ++i)
                if (rng.bernoulli(0.5)) members[m].set(i % 4, i / 4, 0);
        std::vector<const Mask3D*> before, after;
        for (int m = 0; m < k; ++m) before.push_back(&members[m]);
        for (int m = 0; m <= k; ++m) after.push_back(&members[m]);
        const Mask3D mb = consensus_mask(before);
        const Mask3D ma = consensus_mask(after);
        for (int i = 0; i < 16; ++i) {
            const int x = i % 4, y = i / 4;
            if (mb.test(x, y, 0) && members[k].test(x, y, 0)) CHECK(ma.test(x, y, 0));
        }
    }
}

TEST_CASE("consensus rating rounds half away from zero") {
    CHECK(consensus_rating({3, 3, 3}) == 3);
    CHECK(consensus_rating({4, 4, 5}) == 4);  // mean 4.33
    CHECK(consensus_rating({4, 5}) == 5);     // mean 4.5
    CHECK(consensus_rating({1, 2}) == 2);     // mean 1.5
    CHECK(consensus_rating({2, 3, 4, 5}) == 4);  // mean 3.5
}

TEST_CASE("consensus rating is permutation invariant") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<int> ratings;
        const int k = 1 + static_cast<int>(rng.uniform_int(4));
        for (int i = 0; i < k; ++i) ratings.push_back(1 + static_cast<int>(rng.uniform_int(5)));
        const int base = consensus_rating(ratings);
        std::vector<int> shuffled = ratings;
        rng.shuffle(shuffled);
        CHECK(consensus_rating(shuffled) == base);
    }
}

TEST_CASE("consensus centroid") {
    const Dims dims{12, 12, 5};
    // symmetric cube centred at (5,5,2)
    const Mask3D cube = cube_mask(dims, 5, 5, 2, 1);
    const Vec3 c1 = consensus_centroid({&cube});
    CHECK(c1.x == doctest::Approx(5.0));
    CHECK(c1.y == doctest::Approx(5.0));
    CHECK(c1.z == doctest::Approx(2.0));

    // two members average their centres of mass
    const Mask3D a = cube_mask(dims, 4, 4, 2, 0);
    const Mask3D b = cube_mask(dims, 6, 6, 2, 0);
    const Vec3 c2 = consensus_centroid({&a, &b});
    CHECK(c2.x == doctest::Approx(5.0));
    CHECK(c2.y == doctest::Approx(5.0));

    // three members, hand arithmetic
    const Mask3D u = cube_mask(dims, 0, 0, 0, 0);
    const Mask3D v = cube_mask(dims, 3, 0, 0, 0);
    const Mask3D w = cube_mask(dims, 0, 3, 0, 0);
    const Vec3 c3 = consensus_centroid({&u, &v, &w});
    CHECK(c3.x == doctest::Approx(1.0));
    CHECK(c3.y == doctest::Approx(1.0));
    CHECK(c3.z == doctest::Approx(0.0));
}

TEST_CASE("empty member mask raises EmptyMask") {
    Mask3D empty(Dims{4, 4, 1});
    CHECK_THROWS_AS(consensus_centroid({&empty}), EmptyMask);
}

TEST_CASE("cohort labelling rules") {
    std::vector<ConsensusNodule> nodules;
    const int ratings[] = {1, 1, 4, 5, 3};
    for (int i = 0; i < 5; ++i)
        nodules.push_back(make_nodule("n" + std::to_string(i), "p" + std::to_string(i), ratings[i]));

    const auto s1 = build_cohort(nodules, {}, Design::S1vS45, false, 0);
    REQUIRE(s1.size() == 4);  // rating 3 excluded
    CHECK(s1[0].label == CohortLabel::negative);
    CHECK(s1[1].label == CohortLabel::negative);
    CHECK(s1[2].label == CohortLabel::positive);
    CHECK(s1[3].label == CohortLabel::positive);

    std::vector<ConsensusNodule> pair = {make_nodule("a", "pa", 2), make_nodule("b", "pb", 4)};
    const auto s12 = build_cohort(pair, {}, Design::S12vS45, false, 0);
    REQUIRE(s12.size() == 2);
    CHECK(s12[0].label == CohortLabel::negative);
    CHECK(s12[1].label == CohortLabel::positive);

    // rating 2 is excluded under S1vS45
    const auto excl = build_cohort({make_nodule("a", "pa", 2), make_nodule("b", "pb", 1),
                                    make_nodule("c", "pc", 4)},
                                   {}, Design::S1vS45, false, 0);
    CHECK(excl.size() == 2);
    for (const auto& item : excl) CHECK(item.rating != 2);
}

TEST_CASE("S0 design uses non-nodule loci as negatives") {
    std::vector<ConsensusNodule> nodules = {make_nodule("n0", "p0", 3)};
    std::vector<NonNoduleLocus> loci = {{"x0", "p0", {1, 2, 3}}, {"x1", "p1", {4, 5, 6}}};
    const auto cohort = build_cohort(nodules, loci, Design::S0vS1_5, false, 0);
    REQUIRE(cohort.size() == 3);
    int pos = 0, neg = 0;
    for (const auto& item : cohort) {
        if (item.label == CohortLabel::positive) {
            ++pos;
            CHECK(item.source == CohortSource::nodule);
        } else {
            ++neg;
            CHECK(item.source == CohortSource::non_nodule);
            CHECK(item.rating == 0);
        }
    }
    CHECK(pos == 1);
    CHECK(neg == 2);
}

TEST_CASE("balancing undersamples the majority class exactly") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<ConsensusNodule> nodules;
        const int n_neg = 2 + static_cast<int>(rng.uniform_int(20));
        const int n_pos = 2 + static_cast<int>(rng.uniform_int(20));
        for (int i = 0; i < n_neg; ++i)
            nodules.push_back(make_nodule("neg" + std::to_string(i), "p", 1));
        for (int i = 0; i < n_pos; ++i)
            nodules.push_back(make_nodule("pos" + std::to_string(i), "p", 5));

        const auto balanced = build_cohort(nodules, {}, Design::S1vS45, true, trial);
        int pos = 0, neg = 0;
        for (const auto& item : balanced)
            (item.label == CohortLabel::positive ? pos : neg)++;
        CHECK(pos == neg);
        CHECK(pos == std::min(n_pos, n_neg));

        const auto unbalanced = build_cohort(nodules, {}, Design::S1vS45, false, trial);
        CHECK(unbalanced.size() == static_cast<std::size_t>(n_pos + n_neg));
    }
}

TEST_CASE("a design with an empty class is rejected") {
    CHECK_THROWS_AS(build_cohort({make_nodule("a", "p", 1)}, {}, Design::S1vS45, false, 0),
                    EmptyClass);
}

TEST_CASE("full consensus pass over a parsed annotation set") {
    const char* doc = R"(<annotations patient_id="P7">
  <readingSession>
    <nodule id="r1n1"><malignancy>4</malignancy>
      <roi sliceIndex="1"><edge x="2" y="2"/><edge x="6" y="2"/><edge x="6" y="6"/><edge x="2" y="6"/></roi>
    </nodule>
  </readingSession>
  <readingSession>
    <nodule id="r2n1"><malignancy>5</malignancy>
      <roi sliceIndex="1"><edge x="3" y="3"/><edge x="7" y="3"/><edge x="7" y="7"/><edge x="3" y="7"/></roi>
    </nodule>
    <nonNodule x="12" y="12" z="2"/>
  </readingSession>
</annotations>)";
    const AnnotationSet set = parse_annotations(doc);
    const Dims dims{16, 16, 4};
    const auto nodules = build_consensus(set, dims);
    REQUIRE(nodules.size() == 1);
    CHECK(nodules[0].member_readings.size() == 2);
    CHECK(nodules[0].rating == 5);  // mean 4.5 rounds away from zero
    CHECK(nodules[0].patient_id == "P7");
    CHECK(!nodules[0].consensus_mask.empty());
    // no reading belongs to two groups
    CHECK(collect_non_nodules(set).size() == 1);
}

}  // TEST_SUITE

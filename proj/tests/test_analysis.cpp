#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "clnet/analysis.hpp"
#include "clnet/errors.hpp"

using namespace clnet;
namespace fs = std::filesystem;

namespace {

using Cands = std::vector<std::pair<BBox, double>>;

const BBox kGt{10, 10, 20, 20};

// shifted copies of kGt with known overlap: dx=0 -> 1.0, dx=20 -> 0
BBox shifted(double dx) { return BBox{10 + dx, 10, 20, 20}; }

} // namespace

TEST_CASE("decisive pair splits candidates against the ground truth") {
    Cands c = {
        {shifted(0), 0.6},  // overlap 1.0, target side
        {shifted(2), 0.8},  // overlap 18/22 ~ 0.82, target side, higher score
        {shifted(15), 0.9}, // overlap 5/35 ~ 0.14, distractor side
        {shifted(25), 0.3}, // disjoint, distractor side
    };
    FrameDiagnostics d = decisive_boxes(c, kGt);
    REQUIRE(d.has_p);
    REQUIRE(d.has_n);
    CHECK(d.p_score == 0.8);
    CHECK(d.n_score == 0.9);
    CHECK(d.d == doctest::Approx(-0.1));
    CHECK(d.p_box.x == 12.0);
    CHECK(d.n_box.x == 25.0);
    CHECK(d.p_overlap == doctest::Approx(18.0 / 22.0));
    CHECK(d.n_overlap == doctest::Approx(5.0 / 35.0));
}

TEST_CASE("split threshold sits at overlap 0.5") {
    // the top half of kGt: inter 200, union 400, all exact in doubles
    BBox half{10, 10, 20, 10};
    REQUIRE(iou(half, kGt) == 0.5);
    Cands c = {{half, 0.7}, {shifted(30), 0.2}};
    FrameDiagnostics d = decisive_boxes(c, kGt);
    // boundary counts as target side
    CHECK(d.has_p);
    CHECK(d.p_score == 0.7);
    CHECK(d.n_score == 0.2);
}

TEST_CASE("no target-side candidate zeroes the whole difference") {
    Cands c = {{shifted(30), 0.9}, {shifted(40), 0.8}};
    FrameDiagnostics d = decisive_boxes(c, kGt);
    CHECK_FALSE(d.has_p);
    CHECK(d.has_n);
    CHECK(d.p_score == 0.0);
    CHECK(d.n_score == 0.0); // collapsed along with the missing side
    CHECK(d.d == 0.0);
}

TEST_CASE("no distractor-side candidate keeps the target score") {
    Cands c = {{shifted(0), 0.85}, {shifted(1), 0.95}};
    FrameDiagnostics d = decisive_boxes(c, kGt);
    CHECK(d.has_p);
    CHECK_FALSE(d.has_n);
    CHECK(d.p_score == 0.95);
    CHECK(d.n_score == 0.0);
    CHECK(d.d == 0.95);
}

TEST_CASE("empty candidate list yields the neutral row") {
    FrameDiagnostics d = decisive_boxes({}, kGt);
    CHECK_FALSE(d.has_p);
    CHECK_FALSE(d.has_n);
    CHECK(d.d == 0.0);
}

TEST_CASE("candidate order does not matter") {
    Cands c = {
        {shifted(1), 0.5}, {shifted(0), 0.7}, {shifted(22), 0.6}, {shifted(35), 0.4}};
    FrameDiagnostics base = decisive_boxes(c, kGt);
    std::sort(c.begin(), c.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    FrameDiagnostics sorted = decisive_boxes(c, kGt);
    CHECK(base.p_score == sorted.p_score);
    CHECK(base.n_score == sorted.n_score);
    CHECK(base.d == sorted.d);
}

TEST_CASE("difference stays inside the probability range") {
    Rng rng(404);
    for (int trial = 0; trial < 200; ++trial) {
        Cands c;
        int n = rng.uniform_int(8);
        for (int i = 0; i < n; ++i) {
            BBox b{rng.uniform(0, 40), rng.uniform(0, 40), rng.uniform(2, 25),
                   rng.uniform(2, 25)};
            c.push_back({b, rng.uniform(0, 1)});
        }
        FrameDiagnostics d = decisive_boxes(c, kGt);
        CHECK(d.d >= -1.0);
        CHECK(d.d <= 1.0);
        CHECK(d.d == doctest::Approx(d.p_score - d.n_score));
        if (!d.has_p) CHECK(d.d == 0.0);
    }
}

namespace {

TrackOutput toy_output() {
    TrackOutput out;
    for (int f = 0; f < 4; ++f) {
        FrameRecord r;
        r.frame = f;
        r.box = shifted(f == 3 ? 10.0 : 0.0);
        r.score = 0.9;
        out.records.push_back(r);
    }
    out.candidates.resize(4);
    // frame 0 stays empty by construction
    out.candidates[1] = {{shifted(0), 0.8}, {shifted(30), 0.3}}; // d = 0.5
    out.candidates[2] = {{shifted(0), 0.4}, {shifted(30), 0.9}}; // d = -0.5, fault
    out.candidates[3] = {{shifted(30), 0.9}};                    // no target side, d = 0
    return out;
}

std::vector<BBox> toy_gt() { return {kGt, kGt, kGt, kGt}; }

} // namespace

TEST_CASE("sequence report skips the first frame and counts faults") {
    SequenceDiagnostics diag = sequence_report("toy", toy_output(), toy_gt());
    CHECK(diag.id == "toy");
    REQUIRE(diag.rows.size() == 3);
    CHECK(diag.rows[0].frame == 1);
    CHECK(diag.rows[0].d == doctest::Approx(0.5));
    CHECK(diag.rows[1].d == doctest::Approx(-0.5));
    CHECK(diag.rows[2].d == 0.0);
    CHECK(diag.mean_d == doctest::Approx(0.0));
    CHECK(diag.faults == 1);
    // overlap column tracks the predicted box, not the candidates
    CHECK(diag.rows[0].overlap == doctest::Approx(1.0));
    CHECK(diag.rows[2].overlap == doctest::Approx(10.0 / 30.0));
}

TEST_CASE("sequence report validates its inputs") {
    TrackOutput out = toy_output();
    SUBCASE("candidate rows must match records") {
        out.candidates.pop_back();
        CHECK_THROWS_AS(sequence_report("x", out, toy_gt()), InputError);
    }
    SUBCASE("ground truth must cover every record") {
        std::vector<BBox> gt = {kGt, kGt};
        CHECK_THROWS_AS(sequence_report("x", out, gt), InputError);
    }
}

TEST_CASE("diagnostics csv layout") {
    SequenceDiagnostics diag = sequence_report("toy", toy_output(), toy_gt());
    fs::create_directories("/tmp/clnet_an");
    std::string path = "/tmp/clnet_an/diag.csv";
    write_diagnostics_csv(path, diag);

    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    std::getline(in, line);
    CHECK(line == "frame,p_score,n_score,d,overlap");
    int rows = 0;
    std::string trailer;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '#') {
            trailer = line;
        } else if (!line.empty()) {
            ++rows;
            CHECK(std::count(line.begin(), line.end(), ',') == 4);
        }
    }
    CHECK(rows == 3);
    CHECK(trailer.find("mean_d=") != std::string::npos);
    CHECK(trailer.find("faults=1") != std::string::npos);
    fs::remove_all("/tmp/clnet_an");
}

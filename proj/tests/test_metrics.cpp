#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/error.hpp"
#include "core/metrics.hpp"
#include "core/rng.hpp"
#include "oracles.hpp"

using namespace mvq;

namespace {

JudgedEntry entry(bool positive, const std::string& camera, Vec view_feature,
                  Viewpoint vp = Viewpoint::Front) {
    JudgedEntry e;
    e.positive = positive;
    e.camera_id = camera;
    e.viewpoint = vp;
    e.viewpoint_feature = std::move(view_feature);
    return e;
}

JudgedList random_list(SeededRng& rng, size_t max_len = 30) {
    const size_t n = 1 + rng.uniform_int(max_len);
    const double p_pos = rng.uniform(0.1, 0.7);
    JudgedList list;
    for (size_t i = 0; i < n; ++i) {
        JudgedEntry e;
        e.positive = rng.uniform() < p_pos;
        e.camera_id = "c" + std::to_string(rng.uniform_int(5));
        e.viewpoint = static_cast<Viewpoint>(static_cast<int>(rng.uniform_int(3)));
        e.viewpoint_feature = rng.unit_vector(4);
        list.push_back(std::move(e));
    }
    return list;
}

// random orthogonal matrix via Gram-Schmidt
std::vector<Vec> random_rotation(SeededRng& rng, size_t dim) {
    std::vector<Vec> q;
    for (size_t i = 0; i < dim; ++i) {
        Vec v = rng.gaussian_vector(dim);
        for (const auto& u : q) {
            const double proj = dot(u, v);
            for (size_t k = 0; k < dim; ++k) v[k] -= proj * u[k];
        }
        q.push_back(l2_normalize(v));
    }
    return q;
}

Vec rotate(const std::vector<Vec>& q, const Vec& v) {
    Vec out(v.size(), 0.0);
    for (size_t i = 0; i < v.size(); ++i)
        out[i] = dot(q[i], v);
    return out;
}

}  // namespace

TEST_CASE("cmc fixtures") {
    JudgedList first{entry(true, "c1", {1, 0})};
    CHECK(cmc_at_k(first, 1) == 1.0);

    JudgedList third{entry(false, "c1", {1, 0}), entry(false, "c1", {1, 0}),
                     entry(true, "c2", {1, 0})};
    CHECK(cmc_at_k(third, 1) == 0.0);
    CHECK(cmc_at_k(third, 5) == 1.0);  // k beyond length scans the full list
    CHECK_THROWS_AS(cmc_at_k(third, 0), Error);
}

TEST_CASE("average precision fixtures") {
    JudgedList perfect{entry(true, "c1", {1, 0}), entry(true, "c2", {1, 0})};
    CHECK(average_precision(perfect) == doctest::Approx(1.0));

    JudgedList mixed{entry(true, "c1", {1, 0}), entry(false, "c1", {1, 0}),
                     entry(true, "c2", {1, 0})};
    CHECK(average_precision(mixed) == doctest::Approx(5.0 / 6.0).epsilon(1e-12));

    JudgedList none{entry(false, "c1", {1, 0})};
    CHECK(average_precision(none) == 0.0);
}

TEST_CASE("inp fixtures") {
    JudgedList perfect{entry(true, "c1", {1, 0}), entry(true, "c2", {1, 0})};
    CHECK(inp(perfect) == doctest::Approx(1.0));

    JudgedList late{entry(true, "c1", {1, 0}), entry(false, "c1", {1, 0}),
                    entry(false, "c2", {1, 0}), entry(true, "c2", {1, 0})};
    CHECK(inp(late) == doctest::Approx(0.5));
}

TEST_CASE("cgm fixtures") {
    // all positives from distinct cameras: collapse is the identity
    JudgedList distinct{entry(true, "c1", {1, 0}), entry(false, "c9", {1, 0}),
                        entry(true, "c2", {1, 0})};
    CHECK(cgm(distinct) == doctest::Approx(average_precision(distinct)).epsilon(1e-12));

    // [+c1, +c1, +c2] -> collapsed [+c1, +c2] -> AP 1
    JudgedList same{entry(true, "c1", {1, 0}), entry(true, "c1", {1, 0}),
                    entry(true, "c2", {1, 0})};
    CHECK(cgm(same) == doctest::Approx(1.0));
}

TEST_CASE("csp hand fixture: same-camera similar-view positive is deleted") {
    Vec v{1, 0, 0, 0};
    Vec v_close{0.95, 0.312, 0, 0};  // |v - v'| ~ 0.316 < 0.5
    Vec u{0, 1, 0, 0};
    JudgedList list{
        entry(true, "c1", v),
        entry(true, "c1", l2_normalize(v_close)),
        entry(false, "c3", u),
        entry(true, "c2", u),
        entry(false, "c3", u),
    };
    const CspResult r = csp(list, 0.5);
    CHECK(r.value == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK(r.suppressed == 1);
    CHECK(r.retained_positives == 2);

    // the unfiltered list scores higher: the easy duplicate inflates AP
    CHECK(average_precision(list) == doctest::Approx(11.0 / 12.0).epsilon(1e-12));

    // distinct cameras: no suppression
    JudgedList distinct{entry(true, "c1", v), entry(true, "c2", v),
                        entry(false, "c3", u), entry(true, "c4", u)};
    CHECK(csp(distinct, 0.5).value ==
          doctest::Approx(average_precision(distinct)).epsilon(1e-12));
}

TEST_CASE("csp epsilon to zero keeps every distinct-feature positive") {
    SeededRng rng(3);
    JudgedList list = random_list(rng);
    const CspResult r = csp(list, 1e-12);
    CHECK(r.value == doctest::Approx(average_precision(list)).epsilon(1e-12));
    CHECK(r.suppressed == 0);
}

TEST_CASE("csp label mode uses discrete viewpoints") {
    JudgedList list{
        entry(true, "c1", {}, Viewpoint::Front),
        entry(true, "c1", {}, Viewpoint::Front),  // same camera+label: deleted
        entry(true, "c1", {}, Viewpoint::Side),
        entry(true, "c2", {}, Viewpoint::Front),
    };
    const CspResult r = csp(list, 0.5, SuppressionMode::Labels);
    CHECK(r.suppressed == 1);
    CHECK(r.retained_positives == 3);
    CHECK(r.value == doctest::Approx(1.0));
}

TEST_CASE("all metrics match brute-force oracles on random lists") {
    SeededRng rng(101);
    for (int trial = 0; trial < 300; ++trial) {
        JudgedList list = random_list(rng);
        const double eps = rng.uniform(0.1, 1.5);

        CHECK(average_precision(list) == doctest::Approx(oracle::ap(list)).epsilon(1e-12));
        CHECK(inp(list) == doctest::Approx(oracle::inp(list)).epsilon(1e-12));
        CHECK(cgm(list) == doctest::Approx(oracle::cgm(list)).epsilon(1e-12));
        for (size_t k : {size_t{1}, size_t{5}, size_t{10}})
            CHECK(cmc_at_k(list, k) == oracle::cmc(list, k));
        size_t retained = 0;
        const double oc = oracle::csp(list, eps, false, &retained);
        const CspResult r = csp(list, eps);
        CHECK(r.value == doctest::Approx(oc).epsilon(1e-12));
        CHECK(r.retained_positives == retained);

        const CspResult rl = csp(list, eps, SuppressionMode::Labels);
        CHECK(rl.value == doctest::Approx(oracle::csp(list, eps, true)).epsilon(1e-12));
    }
}

TEST_CASE("metric values stay in [0,1] and are deterministic") {
    SeededRng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        JudgedList list = random_list(rng);
        for (double m : {average_precision(list), inp(list), cgm(list),
                         csp(list, 0.5).value, cmc_at_k(list, 3)}) {
            CHECK(m >= 0.0);
            CHECK(m <= 1.0);
        }
        CHECK(csp(list, 0.5).value == csp(list, 0.5).value);
    }
}

TEST_CASE("metrics are invariant to camera relabeling and viewpoint rotation") {
    SeededRng rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        JudgedList list = random_list(rng);
        const double eps = rng.uniform(0.2, 1.2);

        JudgedList relabeled = list;
        for (auto& e : relabeled) e.camera_id = "cam_" + e.camera_id + "_x";
        CHECK(csp(relabeled, eps).value == doctest::Approx(csp(list, eps).value).epsilon(1e-12));
        CHECK(cgm(relabeled) == doctest::Approx(cgm(list)).epsilon(1e-12));

        const auto q = random_rotation(rng, 4);
        JudgedList rotated = list;
        for (auto& e : rotated) e.viewpoint_feature = rotate(q, e.viewpoint_feature);
        CHECK(csp(rotated, eps).value == doctest::Approx(csp(list, eps).value).epsilon(1e-9));
    }
}

TEST_CASE("enlarging epsilon never increases the retained positive count") {
    SeededRng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        JudgedList list = random_list(rng);
        size_t prev = SIZE_MAX;
        for (double eps : {0.1, 0.3, 0.6, 1.0, 1.5}) {
            const size_t retained = csp(list, eps).retained_positives;
            CHECK(retained <= prev);
            prev = retained;
        }
    }
}

TEST_CASE("appending a trailing negative never increases any metric") {
    SeededRng rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        JudgedList list = random_list(rng);
        JudgedList longer = list;
        JudgedEntry neg;
        neg.positive = false;
        neg.camera_id = "c_extra";
        neg.viewpoint_feature = rng.unit_vector(4);
        longer.push_back(neg);

        CHECK(average_precision(longer) <= average_precision(list) + 1e-12);
        CHECK(inp(longer) <= inp(list) + 1e-12);
        CHECK(cgm(longer) <= cgm(list) + 1e-12);
        CHECK(csp(longer, 0.5).value <= csp(list, 0.5).value + 1e-12);
    }
}

TEST_CASE("evaluate aggregates are the mean of per-query values") {
    SeededRng rng(23);
    std::vector<NamedJudgedList> lists;
    for (int i = 0; i < 50; ++i) {
        NamedJudgedList nl;
        nl.query_id = "q" + std::to_string(i);
        nl.target_id = "v" + std::to_string(i);
        nl.list = random_list(rng);
        lists.push_back(std::move(nl));
    }
    MetricConfig config;
    EvalReport report = evaluate(lists, config);

    double ap_mean = 0.0, csp_mean = 0.0;
    for (const auto& nl : lists) {
        ap_mean += oracle::ap(nl.list);
        csp_mean += oracle::csp(nl.list, config.epsilon);
    }
    ap_mean /= 50.0;
    csp_mean /= 50.0;
    for (const auto& [name, value] : report.aggregates) {
        if (name == "map") CHECK(value == doctest::Approx(ap_mean).epsilon(1e-12));
        if (name == "mcsp") CHECK(value == doctest::Approx(csp_mean).epsilon(1e-12));
    }
    CHECK(report.per_query.size() == 50);
}

TEST_CASE("evaluate: perfect single query gives all-ones aggregates") {
    NamedJudgedList nl;
    nl.query_id = "q0";
    nl.target_id = "v0";
    nl.list = {entry(true, "c1", {1, 0}), entry(true, "c2", {0, 1})};
    EvalReport report = evaluate({nl}, MetricConfig{});
    for (const auto& [name, value] : report.aggregates)
        CHECK(value == doctest::Approx(1.0));
}

TEST_CASE("evaluate: duplicating a query leaves aggregates unchanged") {
    SeededRng rng(29);
    NamedJudgedList nl;
    nl.query_id = "q0";
    nl.target_id = "v0";
    nl.list = random_list(rng);
    EvalReport one = evaluate({nl}, MetricConfig{});
    EvalReport two = evaluate({nl, nl}, MetricConfig{});
    REQUIRE(one.aggregates.size() == two.aggregates.size());
    for (size_t i = 0; i < one.aggregates.size(); ++i)
        CHECK(one.aggregates[i].second ==
              doctest::Approx(two.aggregates[i].second).epsilon(1e-12));
}

TEST_CASE("zero-positive queries contribute zero and are flagged") {
    NamedJudgedList nl;
    nl.query_id = "q0";
    nl.target_id = "v0";
    nl.list = {entry(false, "c1", {1, 0}), entry(false, "c2", {0, 1})};
    EvalReport report = evaluate({nl}, MetricConfig{});
    CHECK(report.per_query[0].metrics.flagged);
    for (const auto& [name, value] : report.aggregates)
        CHECK(value == 0.0);

    MetricConfig exclude;
    exclude.empty_policy = EmptyPositivePolicy::Exclude;
    CHECK_THROWS_AS(evaluate({nl}, exclude), Error);
}

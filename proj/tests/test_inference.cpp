#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "core/error.hpp"
#include "core/inference.hpp"
#include "core/rng.hpp"

using namespace mvq;

namespace {

FeatureRecord make_record(const std::string& rid, const std::string& vid,
                          const std::string& cam, Viewpoint vp, Vec appearance,
                          Vec view_feature) {
    FeatureRecord r;
    r.record_id = rid;
    r.vehicle_id = vid;
    r.camera_id = cam;
    r.viewpoint = vp;
    r.appearance = l2_normalize(std::move(appearance));
    r.viewpoint_feature = l2_normalize(std::move(view_feature));
    return r;
}

std::vector<FeatureRecord> random_gallery(SeededRng& rng, size_t n, size_t da = 8,
                                          size_t dv = 4) {
    std::vector<FeatureRecord> g;
    for (size_t i = 0; i < n; ++i) {
        g.push_back(make_record("g" + std::to_string(100 + i), "v" + std::to_string(i % 7),
                                "c" + std::to_string(i % 5),
                                static_cast<Viewpoint>(static_cast<int>(i % 3)),
                                rng.unit_vector(da), rng.unit_vector(dv)));
    }
    return g;
}

std::vector<size_t> all_indices(size_t n) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

}  // namespace

TEST_CASE("admit_gallery excludes same-vehicle same-camera records") {
    QuerySet qs;
    qs.target_id = "v1";
    qs.records.push_back(make_record("q1", "v1", "c1", Viewpoint::Front, {1, 0}, {1, 0}));

    std::vector<FeatureRecord> gallery{
        make_record("g1", "v1", "c1", Viewpoint::Front, {1, 0}, {1, 0}),  // junk
        make_record("g2", "v1", "c2", Viewpoint::Side, {0, 1}, {0, 1}),
        make_record("g3", "v2", "c1", Viewpoint::Front, {1, 1}, {1, 1}),
    };
    CHECK(admit_gallery(qs, gallery, true) == std::vector<size_t>{1, 2});
    CHECK(admit_gallery(qs, gallery, false) == std::vector<size_t>{0, 1, 2});

    QuerySet clean;
    clean.target_id = "v9";
    clean.records.push_back(make_record("q2", "v9", "c9", Viewpoint::Front, {1, 0}, {1, 0}));
    CHECK(admit_gallery(clean, gallery, true).size() == 3);
}

TEST_CASE("score_single ranks the query's own feature first") {
    SeededRng rng(1);
    auto gallery = random_gallery(rng, 6);
    FeatureRecord q = make_record("q", "v0", "cq", Viewpoint::Front,
                                  gallery[3].appearance, rng.unit_vector(4));
    RankedList r = score_single(q, gallery, all_indices(gallery.size()));
    CHECK(r.indices[0] == 3);
    CHECK(r.scores[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("score_single breaks score ties by ascending record_id") {
    FeatureRecord q = make_record("q", "v0", "cq", Viewpoint::Front, {1, 0, 0}, {1, 0});
    std::vector<FeatureRecord> gallery{
        make_record("g_b", "v1", "c1", Viewpoint::Front, {0, 1, 0}, {1, 0}),
        make_record("g_a", "v2", "c2", Viewpoint::Side, {0, 0, 1}, {1, 0}),
        make_record("g_c", "v3", "c3", Viewpoint::Rear, {0, 1, 1}, {1, 0}),
    };
    RankedList r = score_single(q, gallery, all_indices(3));
    // all scores 0: order is record_id ascending
    CHECK(gallery[r.indices[0]].record_id == "g_a");
    CHECK(gallery[r.indices[1]].record_id == "g_b");
    CHECK(gallery[r.indices[2]].record_id == "g_c");

    CHECK_THROWS_AS(score_single(q, gallery, {}), Error);
}

TEST_CASE("score_single matches a brute-force sort oracle") {
    SeededRng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        auto gallery = random_gallery(rng, 5);
        FeatureRecord q = make_record("q", "vx", "cx", Viewpoint::Front,
                                      rng.unit_vector(8), rng.unit_vector(4));
        RankedList r = score_single(q, gallery, all_indices(5));

        std::vector<std::pair<double, std::string>> oracle;
        for (size_t i = 0; i < 5; ++i)
            oracle.emplace_back(cosine_sim(q.appearance, gallery[i].appearance),
                                gallery[i].record_id);
        std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (size_t i = 0; i < 5; ++i) {
            CHECK(gallery[r.indices[i]].record_id == oracle[i].second);
            CHECK(r.scores[i] == doctest::Approx(oracle[i].first).epsilon(1e-12));
        }
    }
}

TEST_CASE("score_average equals score_single for identical query features") {
    SeededRng rng(11);
    auto gallery = random_gallery(rng, 8);
    Vec f = rng.unit_vector(8);
    QuerySet qs;
    qs.target_id = "v0";
    for (int i = 0; i < 3; ++i)
        qs.records.push_back(make_record("q" + std::to_string(i), "v0", "cq",
                                         static_cast<Viewpoint>(i), f, rng.unit_vector(4)));
    RankedList avg = score_average(qs, gallery, all_indices(8));
    RankedList single = score_single(qs.records[0], gallery, all_indices(8));
    CHECK(avg.indices == single.indices);
}

TEST_CASE("score_average rejects antipodal queries that cancel to zero") {
    QuerySet qs;
    qs.target_id = "v0";
    qs.records.push_back(make_record("q0", "v0", "c0", Viewpoint::Front, {1, 0}, {1, 0}));
    qs.records.push_back(make_record("q1", "v0", "c1", Viewpoint::Side, {-1, 0}, {1, 0}));
    std::vector<FeatureRecord> gallery{
        make_record("g0", "v0", "c9", Viewpoint::Front, {0, 1}, {1, 0})};
    CHECK_THROWS_AS(score_average(qs, gallery, all_indices(1)), Error);
}

TEST_CASE("score_average matches a mean-then-cosine oracle") {
    SeededRng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        auto gallery = random_gallery(rng, 6);
        QuerySet qs;
        qs.target_id = "v0";
        for (int i = 0; i < 3; ++i)
            qs.records.push_back(make_record("q" + std::to_string(i), "v0", "cq",
                                             static_cast<Viewpoint>(i),
                                             rng.unit_vector(8), rng.unit_vector(4)));
        RankedList r = score_average(qs, gallery, all_indices(6));

        Vec mean(8, 0.0);
        for (const auto& q : qs.records)
            for (size_t k = 0; k < 8; ++k) mean[k] += q.appearance[k] / 3.0;
        const Vec fused = l2_normalize(mean);
        for (size_t i = 0; i < r.indices.size(); ++i) {
            const double expect = cosine_sim(fused, gallery[r.indices[i]].appearance);
            CHECK(r.scores[i] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("viewpoint_weights fixtures") {
    Vec g = l2_normalize({1, 1, 1, 1});
    std::vector<Vec> equal{g, g, g};
    Vec w = viewpoint_weights(equal, g);
    for (double x : w) CHECK(x == doctest::Approx(1.0 / 3).epsilon(1e-9));

    // cosine similarities (1, 0, 0) -> softmax fixture
    std::vector<Vec> feats{{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}};
    Vec gv{1, 0, 0, 0};
    Vec w2 = viewpoint_weights(feats, gv);
    CHECK(w2[0] == doctest::Approx(0.5761).epsilon(1e-4));
    CHECK(w2[1] == doctest::Approx(0.2119).epsilon(1e-4));
    CHECK(w2[2] == doctest::Approx(0.2119).epsilon(1e-4));
    CHECK(w2[0] > w2[1]);  // aligned viewpoint takes the largest weight

    std::vector<Vec> missing{{1, 0, 0, 0}, {}, {0, 0, 1, 0}};
    CHECK_THROWS_AS(viewpoint_weights(missing, gv), Error);
}

TEST_CASE("score_multi with uniform weights equals the mean of per-query cosines") {
    SeededRng rng(17);
    auto gallery = random_gallery(rng, 10);
    Vec shared_view = rng.unit_vector(4);
    for (auto& g : gallery) g.viewpoint_feature = shared_view;

    QuerySet qs;
    qs.target_id = "v0";
    for (int i = 0; i < 3; ++i)
        qs.records.push_back(make_record("q" + std::to_string(i), "v0", "cq",
                                         static_cast<Viewpoint>(i),
                                         rng.unit_vector(8), shared_view));
    InferenceOptions opt;
    opt.junk_filter = false;
    RankedList multi = score_multi(qs, gallery, all_indices(10), nullptr, opt);

    // identical viewpoint features force uniform weights; ranking must equal
    // the unweighted mean of cosines
    for (size_t i = 0; i < multi.indices.size(); ++i) {
        Vec terms(3);
        for (size_t q = 0; q < 3; ++q)
            terms[q] = cosine_sim(qs.records[q].appearance,
                                  gallery[multi.indices[i]].appearance) / 3.0;
        CHECK(multi.scores[i] == doctest::Approx(sum(terms)).epsilon(1e-9));
    }
}

TEST_CASE("score_multi matches a brute-force reimplementation") {
    SeededRng rng(19);
    auto gallery = random_gallery(rng, 10);
    QuerySet qs;
    qs.target_id = "v0";
    for (int i = 0; i < 3; ++i)
        qs.records.push_back(make_record("q" + std::to_string(i), "v0", "cq",
                                         static_cast<Viewpoint>(i),
                                         rng.unit_vector(8), rng.unit_vector(4)));
    InferenceOptions opt;
    RankedList r = score_multi(qs, gallery, all_indices(10), nullptr, opt);

    for (size_t pos = 0; pos < r.indices.size(); ++pos) {
        const FeatureRecord& g = gallery[r.indices[pos]];
        // straight-line: cosines, softmax, weighted sum, explicit loops
        double sims[3];
        for (size_t q = 0; q < 3; ++q) {
            double num = 0.0, na = 0.0, nb = 0.0;
            for (size_t k = 0; k < 4; ++k) {
                num += qs.records[q].viewpoint_feature[k] * g.viewpoint_feature[k];
                na += qs.records[q].viewpoint_feature[k] * qs.records[q].viewpoint_feature[k];
                nb += g.viewpoint_feature[k] * g.viewpoint_feature[k];
            }
            sims[q] = num / (std::sqrt(na) * std::sqrt(nb));
        }
        double mx = std::max({sims[0], sims[1], sims[2]});
        double z = 0.0;
        for (double s : sims) z += std::exp(s - mx);
        double score = 0.0;
        for (size_t q = 0; q < 3; ++q) {
            const double w = std::exp(sims[q] - mx) / z;
            double num = 0.0;
            for (size_t k = 0; k < 8; ++k)
                num += qs.records[q].appearance[k] * g.appearance[k];
            score += w * num;  // features are unit norm
        }
        CHECK(r.scores[pos] == doctest::Approx(score).epsilon(1e-12));
    }
}

TEST_CASE("weight triples lie on the probability simplex") {
    SeededRng rng(23);
    auto gallery = random_gallery(rng, 30);
    std::vector<Vec> qf{rng.unit_vector(4), rng.unit_vector(4), rng.unit_vector(4)};
    for (const auto& g : gallery) {
        Vec w = viewpoint_weights(qf, g.viewpoint_feature);
        double total = 0.0;
        for (double x : w) {
            CHECK(x >= 0.0);
            total += x;
        }
        CHECK(std::abs(total - 1.0) < 1e-9);
    }
}

TEST_CASE("non-uniform weights change the ranking versus unweighted averaging") {
    // Hand-built instance. Weighted scores: B gets weights ~(0.787, 0.107,
    // 0.107) and scores ~0.74; A has symmetric appearance cosines (~0.574
    // regardless of weights). Averaging scores A ~0.99 and B ~0.55, so the
    // two rules disagree on first place.
    QuerySet qs;
    qs.target_id = "v0";
    qs.records.push_back(make_record("q0", "v0", "cq", Viewpoint::Front,
                                     {1, 0, 0, 0}, {1, 0, 0}));
    qs.records.push_back(make_record("q1", "v0", "cq", Viewpoint::Side,
                                     {0, 1, 0, 0}, {-1, 0.1, 0}));
    qs.records.push_back(make_record("q2", "v0", "cq", Viewpoint::Rear,
                                     {0, 0, 1, 0}, {-1, 0, 0.1}));

    std::vector<FeatureRecord> gallery{
        make_record("gA", "v1", "c1", Viewpoint::Front,
                    {1, 1, 1, 0.2}, {1, 1, 1}),
        make_record("gB", "v2", "c2", Viewpoint::Front,
                    {1, 0, 0, 0.35}, {1, 0, 0}),
    };

    InferenceOptions opt;
    RankedList weighted = score_multi(qs, gallery, all_indices(2), nullptr, opt);
    RankedList averaged = score_average(qs, gallery, all_indices(2));
    CHECK(weighted.indices != averaged.indices);
    CHECK(gallery[weighted.indices[0]].record_id == "gB");
    CHECK(gallery[averaged.indices[0]].record_id == "gA");
}

TEST_CASE("extreme viewpoint similarities degrade score_multi to the single query") {
    // Every gallery viewpoint feature equals q0's and opposes q1/q2's, so the
    // weight triple is the same for every item; q1/q2 appearances live in an
    // orthogonal subspace and contribute exactly zero, leaving a positive
    // constant times the single-query score.
    SeededRng rng(29);
    auto gallery = random_gallery(rng, 12);
    Vec gv = rng.unit_vector(4);
    Vec anti = gv;
    for (auto& x : anti) x = -x;
    for (auto& g : gallery) {
        g.viewpoint_feature = gv;
        Vec app = rng.unit_vector(4);
        app.resize(8, 0.0);  // gallery appearances in the first four dims
        g.appearance = app;
    }

    Vec q0_app = rng.unit_vector(4);
    q0_app.resize(8, 0.0);
    Vec q1_app(8, 0.0), q2_app(8, 0.0);
    q1_app[4] = 1.0;  // orthogonal to every gallery appearance
    q2_app[5] = 1.0;

    QuerySet qs;
    qs.target_id = "v0";
    qs.records.push_back(make_record("q0", "v0", "cq", Viewpoint::Front, q0_app, gv));
    qs.records.push_back(make_record("q1", "v0", "cq", Viewpoint::Side, q1_app, anti));
    qs.records.push_back(make_record("q2", "v0", "cq", Viewpoint::Rear, q2_app, anti));

    InferenceOptions opt;
    RankedList fused = score_multi(qs, gallery, all_indices(12), nullptr, opt);
    RankedList single = score_single(qs.records[0], gallery, all_indices(12));
    CHECK(fused.indices == single.indices);

    // exact degradation at the fusion layer: only the first query retained
    RankedList lone = score_fused({qs.records[0]}, gallery, all_indices(12),
                                  FusionRule::WeightedSum);
    CHECK(lone.indices == single.indices);
    for (size_t i = 0; i < lone.scores.size(); ++i)
        CHECK(lone.scores[i] == doctest::Approx(single.scores[i]).epsilon(1e-12));
}

TEST_CASE("score_multi without recovery errors on missing viewpoints") {
    SeededRng rng(31);
    auto gallery = random_gallery(rng, 4);
    QuerySet qs;
    qs.target_id = "v0";
    qs.records.push_back(make_record("q0", "v0", "cq", Viewpoint::Front,
                                     rng.unit_vector(8), rng.unit_vector(4)));
    qs.records.push_back(make_record("q1", "v0", "cq", Viewpoint::Side,
                                     rng.unit_vector(8), rng.unit_vector(4)));
    qs.missing.push_back(Viewpoint::Rear);

    InferenceOptions opt;
    CHECK_THROWS_AS(score_multi(qs, gallery, all_indices(4), nullptr, opt), Error);

    // the 2-view ablation path scores over the available queries
    opt.allow_partial = true;
    RankedList r = score_multi(qs, gallery, all_indices(4), nullptr, opt);
    CHECK(r.indices.size() == 4);
}

TEST_CASE("score_multi single gallery item is trivially first") {
    SeededRng rng(37);
    auto gallery = random_gallery(rng, 1);
    QuerySet qs;
    qs.target_id = "v0";
    for (int i = 0; i < 3; ++i)
        qs.records.push_back(make_record("q" + std::to_string(i), "v0", "cq",
                                         static_cast<Viewpoint>(i),
                                         rng.unit_vector(8), rng.unit_vector(4)));
    InferenceOptions opt;
    RankedList r = score_multi(qs, gallery, all_indices(1), nullptr, opt);
    CHECK(r.indices == std::vector<size_t>{0});
}

TEST_CASE("fusion rules weighted_sum and weighted_feature differ") {
    SeededRng rng(41);
    auto gallery = random_gallery(rng, 15);
    QuerySet qs;
    qs.target_id = "v0";
    for (int i = 0; i < 3; ++i)
        qs.records.push_back(make_record("q" + std::to_string(i), "v0", "cq",
                                         static_cast<Viewpoint>(i),
                                         rng.unit_vector(8), rng.unit_vector(4)));
    InferenceOptions sum_opt, feat_opt;
    feat_opt.fusion = FusionRule::WeightedFeature;
    RankedList a = score_multi(qs, gallery, all_indices(15), nullptr, sum_opt);
    RankedList b = score_multi(qs, gallery, all_indices(15), nullptr, feat_opt);
    bool scores_differ = false;
    for (size_t i = 0; i < a.scores.size(); ++i)
        if (std::abs(a.scores[i] - b.scores[i]) > 1e-9) scores_differ = true;
    CHECK(scores_differ);
}

TEST_CASE("rankings are bitwise deterministic") {
    SeededRng rng(43);
    auto gallery = random_gallery(rng, 20);
    QuerySet qs;
    qs.target_id = "v0";
    for (int i = 0; i < 3; ++i)
        qs.records.push_back(make_record("q" + std::to_string(i), "v0", "cq",
                                         static_cast<Viewpoint>(i),
                                         rng.unit_vector(8), rng.unit_vector(4)));
    InferenceOptions opt;
    RankedList a = score_multi(qs, gallery, all_indices(20), nullptr, opt);
    RankedList b = score_multi(qs, gallery, all_indices(20), nullptr, opt);
    CHECK(a.indices == b.indices);
    for (size_t i = 0; i < a.scores.size(); ++i)
        CHECK(a.scores[i] == b.scores[i]);
}

TEST_CASE("scores are non-increasing down the ranked list") {
    SeededRng rng(47);
    auto gallery = random_gallery(rng, 25);
    QuerySet qs;
    qs.target_id = "v0";
    for (int i = 0; i < 3; ++i)
        qs.records.push_back(make_record("q" + std::to_string(i), "v0", "cq",
                                         static_cast<Viewpoint>(i),
                                         rng.unit_vector(8), rng.unit_vector(4)));
    InferenceOptions opt;
    RankedList r = score_multi(qs, gallery, all_indices(25), nullptr, opt);
    for (size_t i = 1; i < r.scores.size(); ++i)
        CHECK(r.scores[i] <= r.scores[i - 1] + 1e-15);
}

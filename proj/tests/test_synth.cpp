#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "core/error.hpp"
#include "core/io.hpp"
#include "core/synth.hpp"

using namespace mvq;

namespace {

SynthConfig small_config(uint64_t seed = 5) {
    SynthConfig c;
    c.num_identities = 12;
    c.num_cameras = 40;
    c.cameras_min = 6;
    c.cameras_max = 10;
    c.input_dim = 32;
    c.seed = seed;
    return c;
}

std::map<std::string, std::vector<const RawRecord*>> group_by_vehicle(
    const std::vector<RawRecord>& records) {
    std::map<std::string, std::vector<const RawRecord*>> out;
    for (const auto& r : records) out[r.vehicle_id].push_back(&r);
    return out;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
    const SynthConfig c = small_config();
    SynthDataset a = generate(c);
    SynthDataset b = generate(c);
    CHECK(raw_records_to_jsonl(a.train) == raw_records_to_jsonl(b.train));
    CHECK(raw_records_to_jsonl(a.query) == raw_records_to_jsonl(b.query));
    CHECK(raw_records_to_jsonl(a.gallery) == raw_records_to_jsonl(b.gallery));

    SynthConfig c2 = c;
    c2.seed = 99;
    SynthDataset d = generate(c2);
    CHECK(raw_records_to_jsonl(a.train) != raw_records_to_jsonl(d.train));
}

TEST_CASE("noise-free generation collapses each (identity, viewpoint) to one vector") {
    SynthConfig c = small_config();
    c.appearance_noise = 0.0;
    c.camera_style_noise = 0.0;
    c.illumination.clear();
    SynthDataset ds = generate(c);

    std::map<std::pair<std::string, int>, Vec> seen;
    auto check_records = [&](const std::vector<RawRecord>& records) {
        for (const auto& r : records) {
            const auto key = std::make_pair(r.vehicle_id, static_cast<int>(r.viewpoint));
            auto it = seen.find(key);
            if (it == seen.end()) {
                seen[key] = r.x;
            } else {
                for (size_t k = 0; k < r.x.size(); ++k)
                    CHECK(r.x[k] == doctest::Approx(it->second[k]).epsilon(1e-12));
            }
        }
    };
    check_records(ds.train);
    check_records(ds.query);
    check_records(ds.gallery);
}

TEST_CASE("default config camera counts match the target distribution") {
    SynthDataset ds = generate(SynthConfig{});

    std::map<std::string, std::set<std::string>> cameras;
    auto collect = [&](const std::vector<RawRecord>& records) {
        for (const auto& r : records) cameras[r.vehicle_id].insert(r.camera_id);
    };
    collect(ds.train);
    collect(ds.query);
    collect(ds.gallery);

    CHECK(cameras.size() == 50);
    double total = 0.0;
    for (const auto& [vid, cams] : cameras) {
        CHECK(cams.size() >= 30);
        CHECK(cams.size() <= 50);
        total += static_cast<double>(cams.size());
    }
    const double mean = total / static_cast<double>(cameras.size());
    CHECK(mean >= 33.0);
    CHECK(mean <= 37.0);
}

TEST_CASE("identities are separable by nearest centroid") {
    SynthDataset ds = generate(SynthConfig{});
    std::vector<const RawRecord*> all;
    for (const auto& r : ds.train) all.push_back(&r);
    for (const auto& r : ds.query) all.push_back(&r);
    for (const auto& r : ds.gallery) all.push_back(&r);

    std::map<std::string, Vec> centroid;
    std::map<std::string, size_t> count;
    for (const auto* r : all) {
        auto it = centroid.find(r->vehicle_id);
        if (it == centroid.end()) {
            centroid[r->vehicle_id] = r->x;
            count[r->vehicle_id] = 1;
        } else {
            axpy(it->second, 1.0, r->x);
            ++count[r->vehicle_id];
        }
    }
    for (auto& [vid, c] : centroid)
        for (auto& v : c) v /= static_cast<double>(count[vid]);

    size_t correct = 0;
    for (const auto* r : all) {
        double best = 1e300;
        const std::string* best_id = nullptr;
        for (const auto& [vid, c] : centroid) {
            const double d = squared_distance(r->x, c);
            if (d < best) {
                best = d;
                best_id = &vid;
            }
        }
        if (*best_id == r->vehicle_id) ++correct;
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(all.size());
    CHECK(accuracy > 0.9);
}

TEST_CASE("within-viewpoint distances are smaller than cross-viewpoint per identity") {
    SynthDataset ds = generate(small_config(21));
    auto by_vehicle = group_by_vehicle(ds.train);
    for (const auto& [vid, records] : by_vehicle) {
        double within = 0.0, cross = 0.0;
        size_t nw = 0, nc = 0;
        for (size_t i = 0; i < records.size(); ++i)
            for (size_t j = i + 1; j < records.size(); ++j) {
                const double d = std::sqrt(squared_distance(records[i]->x, records[j]->x));
                if (records[i]->viewpoint == records[j]->viewpoint) {
                    within += d;
                    ++nw;
                } else {
                    cross += d;
                    ++nc;
                }
            }
        if (nw == 0 || nc == 0) continue;
        CHECK(within / static_cast<double>(nw) < cross / static_cast<double>(nc));
    }
}

TEST_CASE("no identity appears in both train and test splits") {
    SynthDataset ds = generate(small_config(33));
    std::set<std::string> train_ids, test_ids;
    for (const auto& r : ds.train) train_ids.insert(r.vehicle_id);
    for (const auto& r : ds.query) test_ids.insert(r.vehicle_id);
    for (const auto& r : ds.gallery) test_ids.insert(r.vehicle_id);
    for (const auto& id : train_ids) CHECK(test_ids.count(id) == 0);
    CHECK(!train_ids.empty());
    CHECK(!test_ids.empty());

    // every identity crosses at least 2 cameras and carries all 3 viewpoints
    std::map<std::string, std::set<std::string>> cams;
    std::map<std::string, std::set<int>> views;
    auto collect = [&](const std::vector<RawRecord>& records) {
        for (const auto& r : records) {
            cams[r.vehicle_id].insert(r.camera_id);
            views[r.vehicle_id].insert(static_cast<int>(r.viewpoint));
        }
    };
    collect(ds.train);
    collect(ds.query);
    collect(ds.gallery);
    for (const auto& [vid, c] : cams) CHECK(c.size() >= 2);
    for (const auto& [vid, v] : views) CHECK(v.size() == 3);
}

TEST_CASE("invalid configs are rejected") {
    SynthConfig one_camera = small_config();
    one_camera.cameras_min = 1;
    one_camera.cameras_max = 1;
    CHECK_THROWS_AS(generate(one_camera), Error);

    SynthConfig bad_fractions = small_config();
    bad_fractions.train_fraction = 0.9;
    bad_fractions.query_fraction = 0.9;
    CHECK_THROWS_AS(generate(bad_fractions), Error);

    SynthConfig too_many = small_config();
    too_many.cameras_max = 1000;
    CHECK_THROWS_AS(generate(too_many), Error);
}

TEST_CASE("modify_gallery preserves per-identity counts and adds duplicates") {
    // dense enough that every identity keeps 5 removable cross-camera records
    SynthConfig c = small_config(55);
    c.cameras_min = 14;
    c.cameras_max = 20;
    SynthDataset ds = generate(c);

    CHECK(raw_records_to_jsonl(modify_gallery(ds.gallery, 0, 1)) ==
          raw_records_to_jsonl(ds.gallery));

    const auto modified = modify_gallery(ds.gallery, 5, 1);
    auto before = group_by_vehicle(ds.gallery);
    auto after = group_by_vehicle(modified);
    REQUIRE(before.size() == after.size());
    for (const auto& [vid, records] : before)
        CHECK(after[vid].size() == records.size());

    // per identity: exactly 5 extra same-camera same-viewpoint duplicates
    for (const auto& [vid, records] : after) {
        std::map<std::pair<std::string, int>, size_t> groups_after, groups_before;
        for (const auto* r : records)
            ++groups_after[{r->camera_id, static_cast<int>(r->viewpoint)}];
        for (const auto* r : before[vid])
            ++groups_before[{r->camera_id, static_cast<int>(r->viewpoint)}];
        size_t max_gain = 0;
        for (const auto& [key, n] : groups_after) {
            const size_t was = groups_before.count(key) ? groups_before[key] : 0;
            if (n > was) max_gain = std::max(max_gain, n - was);
        }
        CHECK(max_gain == 5);
    }

    CHECK(raw_records_to_jsonl(modify_gallery(ds.gallery, 5, 1)) ==
          raw_records_to_jsonl(modified));  // deterministic

    // a gallery too small to delete from errors out
    std::vector<RawRecord> tiny(ds.gallery.begin(), ds.gallery.begin() + 3);
    CHECK_THROWS_AS(modify_gallery(tiny, 10, 1), Error);
}

TEST_CASE("query sets have three distinct viewpoints") {
    SynthDataset ds = generate(small_config(77));
    std::vector<FeatureRecord> pool;
    for (const auto& r : ds.query) {
        FeatureRecord f;
        f.record_id = r.record_id;
        f.vehicle_id = r.vehicle_id;
        f.camera_id = r.camera_id;
        f.viewpoint = r.viewpoint;
        f.appearance = l2_normalize(r.x);
        f.viewpoint_feature = l2_normalize(r.x);
        pool.push_back(std::move(f));
    }
    const auto sets = build_query_sets(pool, 9);
    CHECK(!sets.empty());
    for (const auto& qs : sets) {
        REQUIRE(qs.records.size() == 3);
        std::set<int> views;
        for (const auto& r : qs.records) {
            views.insert(static_cast<int>(r.viewpoint));
            CHECK(r.vehicle_id == qs.target_id);
        }
        CHECK(views.size() == 3);
    }
    const auto again = build_query_sets(pool, 9);
    REQUIRE(again.size() == sets.size());
    for (size_t i = 0; i < sets.size(); ++i)
        for (size_t r = 0; r < 3; ++r)
            CHECK(again[i].records[r].record_id == sets[i].records[r].record_id);
}

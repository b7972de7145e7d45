#include "core/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "core/error.hpp"

namespace mvq {

namespace {

std::string pad_id(const char* prefix, size_t n, int width) {
    std::string num = std::to_string(n);
    std::string out(prefix);
    for (int i = static_cast<int>(num.size()); i < width; ++i) out += '0';
    return out + num;
}

}  // namespace

void validate(const SynthConfig& config) {
    if (config.num_identities < 2)
        throw config_error("synth: need at least 2 identities");
    if (config.input_dim < 4)
        throw config_error("synth: input_dim too small");
    if (config.cameras_min < 2)
        throw config_error("synth: identities must cross at least 2 cameras");
    if (config.cameras_min > config.cameras_max)
        throw config_error("synth: cameras_min exceeds cameras_max");
    if (config.cameras_max > config.num_cameras)
        throw config_error("synth: cameras_max exceeds the camera count");
    if (config.records_per_camera_min < 1 ||
        config.records_per_camera_min > config.records_per_camera_max)
        throw config_error("synth: bad records_per_camera range");
    if (config.appearance_noise < 0.0 || config.camera_style_noise < 0.0 ||
        config.viewpoint_offset_magnitude < 0.0)
        throw config_error("synth: noise magnitudes must be nonnegative");
    if (config.viewpoint_identity_rotation < 0.0 ||
        config.viewpoint_identity_rotation >= 1.0)
        throw config_error("synth: viewpoint_identity_rotation must be in [0, 1)");
    if (config.identity_cluster_spread < 0.0 || config.identity_cluster_spread >= 1.0)
        throw config_error("synth: identity_cluster_spread must be in [0, 1)");
    if (config.identity_clusters < 1)
        throw config_error("synth: identity_clusters must be >= 1");
    const double fsum = config.train_fraction + config.query_fraction +
                        config.gallery_fraction;
    if (config.train_fraction <= 0.0 || config.query_fraction <= 0.0 ||
        config.gallery_fraction <= 0.0 || std::abs(fsum - 1.0) > 1e-9)
        throw config_error("synth: split fractions must be positive and sum to 1");
    const size_t train_ids = static_cast<size_t>(
        std::llround(config.train_fraction * static_cast<double>(config.num_identities)));
    if (train_ids < 1 || train_ids >= config.num_identities)
        throw config_error("synth: split leaves an empty train or test identity pool");
}

SynthDataset generate(const SynthConfig& config) {
    validate(config);
    SeededRng rng(config.seed);

    SynthDataset ds;
    ds.config = config;

    // shared structure
    std::array<Vec, 3> view_base;
    for (auto& v : view_base) v = rng.unit_vector(config.input_dim);
    // fixed per-class mixing maps: the identity-specific flavor of each
    // viewpoint is a deterministic function of the identity basis, so the
    // missing-view content is recoverable from the other views
    std::array<Mat, 3> view_mix;
    for (auto& m : view_mix) {
        m = Mat(config.input_dim, config.input_dim);
        const double s = 1.0 / std::sqrt(static_cast<double>(config.input_dim));
        for (auto& w : m.values) w = s * rng.normal();
    }
    std::vector<Vec> cluster_dir;
    for (size_t c = 0; c < std::max<size_t>(1, config.identity_clusters); ++c)
        cluster_dir.push_back(rng.unit_vector(config.input_dim));
    std::vector<Vec> illum_shift;
    for (const auto& level : config.illumination) {
        Vec v = rng.unit_vector(config.input_dim);
        for (auto& x : v) x *= level.magnitude;
        illum_shift.push_back(std::move(v));
        ds.ground_truth.illumination_shifts[level.name] = illum_shift.back();
    }
    std::vector<Vec> camera_style(config.num_cameras);
    for (size_t c = 0; c < config.num_cameras; ++c) {
        camera_style[c] = rng.unit_vector(config.input_dim);
        for (auto& x : camera_style[c]) x *= config.camera_style_noise;
        ds.ground_truth.camera_styles[pad_id("c", c, 4)] = camera_style[c];
    }

    const double rho = config.viewpoint_identity_rotation;
    const size_t camera_span = config.cameras_max - config.cameras_min + 1;

    struct Planned {
        size_t identity;
        size_t camera;
        Viewpoint viewpoint;
        size_t illum;
    };

    std::vector<std::vector<Planned>> per_identity(config.num_identities);
    std::vector<Vec> basis(config.num_identities);
    std::vector<std::array<Vec, 3>> offsets(config.num_identities);

    for (size_t id = 0; id < config.num_identities; ++id) {
        {
            const double s = config.identity_cluster_spread;
            const Vec& cdir = cluster_dir[id % cluster_dir.size()];
            Vec unique = rng.unit_vector(config.input_dim);
            Vec b(config.input_dim);
            for (size_t k = 0; k < config.input_dim; ++k)
                b[k] = (1.0 - s) * unique[k] + s * cdir[k];
            basis[id] = l2_normalize(b);
        }
        for (size_t v = 0; v < 3; ++v) {
            Vec dir = l2_normalize(matvec(view_mix[v], basis[id]));
            Vec blended(config.input_dim);
            for (size_t k = 0; k < config.input_dim; ++k)
                blended[k] = (1.0 - rho) * view_base[v][k] + rho * dir[k];
            blended = l2_normalize(blended);
            for (auto& x : blended) x *= config.viewpoint_offset_magnitude;
            offsets[id][v] = std::move(blended);
        }
        const std::string vid = pad_id("v", id, 3);
        ds.ground_truth.identity_basis[vid] = basis[id];
        ds.ground_truth.viewpoint_offsets[vid] = offsets[id];

        // skewed camera count, mean near the low side of [min, max]
        const double u = rng.uniform();
        size_t count = config.cameras_min +
                       static_cast<size_t>(std::floor(static_cast<double>(camera_span) * u * u * u));
        count = std::min(count, config.cameras_max);

        std::vector<size_t> cams(config.num_cameras);
        for (size_t c = 0; c < config.num_cameras; ++c) cams[c] = c;
        rng.shuffle(cams);
        cams.resize(count);

        for (size_t cam : cams) {
            const size_t span = config.records_per_camera_max -
                                config.records_per_camera_min + 1;
            const size_t records_here =
                config.records_per_camera_min + rng.uniform_int(span);
            for (size_t r = 0; r < records_here; ++r) {
                Planned p;
                p.identity = id;
                p.camera = cam;
                p.viewpoint = static_cast<Viewpoint>(static_cast<int>(rng.uniform_int(3)));
                p.illum = illum_shift.empty() ? SIZE_MAX : rng.uniform_int(illum_shift.size());
                per_identity[id].push_back(p);
            }
        }
        // guarantee all three viewpoints
        if (per_identity[id].size() < 3)
            throw config_error("synth: identity cannot host all three viewpoints");
        for (int v = 0; v < 3; ++v)
            per_identity[id][static_cast<size_t>(v)].viewpoint = static_cast<Viewpoint>(v);
    }

    // materialize records in a fixed order
    size_t record_counter = 0;
    std::vector<std::vector<RawRecord>> records(config.num_identities);
    for (size_t id = 0; id < config.num_identities; ++id) {
        for (const Planned& p : per_identity[id]) {
            RawRecord rec;
            rec.record_id = pad_id("r", record_counter++, 6);
            rec.vehicle_id = pad_id("v", id, 3);
            rec.camera_id = pad_id("c", p.camera, 4);
            rec.viewpoint = p.viewpoint;
            rec.x = basis[id];
            axpy(rec.x, 1.0, offsets[id][static_cast<size_t>(p.viewpoint)]);
            axpy(rec.x, 1.0, camera_style[p.camera]);
            if (p.illum != SIZE_MAX) axpy(rec.x, 1.0, illum_shift[p.illum]);
            if (config.appearance_noise > 0.0) {
                Vec noise = rng.gaussian_vector(config.input_dim, config.appearance_noise);
                axpy(rec.x, 1.0, noise);
            }
            // quantize to f32 so the in-memory pipeline matches the files
            for (auto& val : rec.x) val = static_cast<double>(static_cast<float>(val));
            records[id].push_back(std::move(rec));
        }
    }

    // identity-disjoint split
    std::vector<size_t> ids(config.num_identities);
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    rng.shuffle(ids);
    const size_t train_count = static_cast<size_t>(std::llround(
        config.train_fraction * static_cast<double>(config.num_identities)));
    std::set<size_t> train_ids(ids.begin(), ids.begin() + static_cast<long>(train_count));

    const double query_share =
        config.query_fraction / (config.query_fraction + config.gallery_fraction);

    for (size_t id = 0; id < config.num_identities; ++id) {
        if (train_ids.count(id)) {
            for (auto& rec : records[id]) ds.train.push_back(rec);
            continue;
        }
        // per-viewpoint partition of the test identity's records
        for (int v = 0; v < 3; ++v) {
            std::vector<const RawRecord*> of_view;
            for (const auto& rec : records[id])
                if (rec.viewpoint == static_cast<Viewpoint>(v)) of_view.push_back(&rec);
            if (of_view.size() < 2) {
                for (const auto* rec : of_view) ds.gallery.push_back(*rec);
                continue;
            }
            size_t q = static_cast<size_t>(
                std::ceil(query_share * static_cast<double>(of_view.size())));
            q = std::clamp<size_t>(q, 1, of_view.size() - 1);
            for (size_t i = 0; i < of_view.size(); ++i) {
                if (i < q)
                    ds.query.push_back(*of_view[i]);
                else
                    ds.gallery.push_back(*of_view[i]);
            }
        }
    }
    return ds;
}

std::vector<RawRecord> modify_gallery(const std::vector<RawRecord>& gallery,
                                      size_t add_k, uint64_t seed) {
    if (add_k != 0 && add_k != 5 && add_k != 10)
        throw config_error("modify_gallery: add_k must be 0, 5 or 10");
    if (add_k == 0) return gallery;

    SeededRng rng(seed);
    std::map<std::string, std::vector<size_t>> by_vehicle;
    for (size_t i = 0; i < gallery.size(); ++i)
        by_vehicle[gallery[i].vehicle_id].push_back(i);

    std::vector<bool> deleted(gallery.size(), false);
    std::vector<RawRecord> added;

    for (const auto& [vid, indices] : by_vehicle) {
        const size_t source = indices[rng.uniform_int(indices.size())];
        std::vector<size_t> removable;
        for (size_t i : indices)
            if (gallery[i].camera_id != gallery[source].camera_id)
                removable.push_back(i);
        if (removable.size() < add_k)
            throw data_error("modify_gallery: identity '" + vid +
                             "' lacks removable cross-camera records");
        rng.shuffle(removable);
        for (size_t i = 0; i < add_k; ++i) deleted[removable[i]] = true;

        for (size_t d = 0; d < add_k; ++d) {
            RawRecord dup = gallery[source];
            dup.record_id = gallery[source].record_id + "d" + std::to_string(d);
            Vec noise = rng.gaussian_vector(dup.x.size(), 0.01);
            axpy(dup.x, 1.0, noise);
            for (auto& val : dup.x) val = static_cast<double>(static_cast<float>(val));
            added.push_back(std::move(dup));
        }
    }

    std::vector<RawRecord> out;
    out.reserve(gallery.size());
    for (size_t i = 0; i < gallery.size(); ++i)
        if (!deleted[i]) out.push_back(gallery[i]);
    for (auto& rec : added) out.push_back(std::move(rec));
    return out;
}

std::vector<QuerySet> build_query_sets(
    const std::vector<FeatureRecord>& query_pool, uint64_t seed) {
    SeededRng rng(seed);
    std::map<std::string, std::array<std::vector<const FeatureRecord*>, 3>> pool;
    for (const auto& rec : query_pool)
        pool[rec.vehicle_id][static_cast<size_t>(rec.viewpoint)].push_back(&rec);

    std::vector<QuerySet> sets;
    for (const auto& [vid, views] : pool) {
        if (views[0].empty() || views[1].empty() || views[2].empty()) continue;
        QuerySet qs;
        qs.target_id = vid;
        for (size_t v = 0; v < 3; ++v)
            qs.records.push_back(*views[v][rng.uniform_int(views[v].size())]);
        sets.push_back(std::move(qs));
    }
    if (sets.empty())
        throw data_error("build_query_sets: no identity has all three viewpoints in the pool");
    return sets;
}

}  // namespace mvq

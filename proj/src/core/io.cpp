#include "core/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace mvq {

namespace {

std::string format_f32(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(static_cast<float>(value)));
    return buf;
}

void append_f32_array(std::string& out, const Vec& v) {
    out += '[';
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_f32(v[i]);
    }
    out += ']';
}

std::string json_string(const std::string& s) {
    return nlohmann::json(s).dump();
}

void require_keys(const OrderedJson& j, std::initializer_list<const char*> keys,
                  const std::string& what) {
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* k : keys)
            if (key == k) { known = true; break; }
        if (!known)
            throw config_error(what + ": unknown key '" + key + "'");
    }
}

Vec vec_from_json(const OrderedJson& j) {
    if (!j.is_array())
        throw data_error("expected a numeric array");
    Vec v;
    v.reserve(j.size());
    for (const auto& x : j) v.push_back(x.get<double>());
    return v;
}

void validate_unit_feature(const Vec& v, const char* what, size_t line_no) {
    if (v.empty())
        throw data_error(std::string(what) + ": empty feature at line " +
                         std::to_string(line_no));
    if (!all_finite(v))
        throw data_error(std::string(what) + ": non-finite feature at line " +
                         std::to_string(line_no));
    const double n = norm(v);
    if (std::abs(n - 1.0) > 1e-4)
        throw data_error(std::string(what) + ": feature at line " +
                         std::to_string(line_no) + " is not unit norm (|f|=" +
                         std::to_string(n) + ")");
}

template <typename T>
void put_le(std::string& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const std::string& bytes, size_t& pos) {
    if (pos + sizeof(T) > bytes.size())
        throw data_error("binary cache truncated");
    T value;
    std::memcpy(&value, bytes.data() + pos, sizeof(T));
    pos += sizeof(T);
    return value;
}

void put_string(std::string& out, const std::string& s) {
    put_le<uint32_t>(out, static_cast<uint32_t>(s.size()));
    out += s;
}

std::string get_string(const std::string& bytes, size_t& pos) {
    const uint32_t n = get_le<uint32_t>(bytes, pos);
    if (pos + n > bytes.size())
        throw data_error("binary cache truncated");
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
}

}  // namespace

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw data_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw data_error("cannot write file: " + path);
    out << content;
    if (!out)
        throw data_error("write failed: " + path);
}

std::string raw_records_to_jsonl(const std::vector<RawRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += "{\"record_id\":" + json_string(r.record_id);
        out += ",\"vehicle_id\":" + json_string(r.vehicle_id);
        out += ",\"camera_id\":" + json_string(r.camera_id);
        out += ",\"viewpoint\":" + json_string(viewpoint_name(r.viewpoint));
        out += ",\"x\":";
        append_f32_array(out, r.x);
        out += "}\n";
    }
    return out;
}

std::vector<RawRecord> raw_records_from_jsonl(const std::string& text) {
    std::vector<RawRecord> records;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    size_t dim = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        OrderedJson j = parse_json(line, "raw record line " + std::to_string(line_no));
        require_keys(j, {"record_id", "vehicle_id", "camera_id", "viewpoint", "x"},
                     "raw record");
        RawRecord r;
        r.record_id = j.at("record_id").get<std::string>();
        r.vehicle_id = j.at("vehicle_id").get<std::string>();
        r.camera_id = j.at("camera_id").get<std::string>();
        r.viewpoint = viewpoint_from_name(j.at("viewpoint").get<std::string>());
        r.x = vec_from_json(j.at("x"));
        if (!all_finite(r.x))
            throw data_error("raw record: non-finite x at line " + std::to_string(line_no));
        if (dim == 0) dim = r.x.size();
        if (r.x.size() != dim)
            throw data_error("raw record: inconsistent dims at line " + std::to_string(line_no));
        records.push_back(std::move(r));
    }
    return records;
}

std::string feature_records_to_jsonl(const std::vector<FeatureRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += "{\"record_id\":" + json_string(r.record_id);
        out += ",\"vehicle_id\":" + json_string(r.vehicle_id);
        out += ",\"camera_id\":" + json_string(r.camera_id);
        out += ",\"viewpoint\":" + json_string(viewpoint_name(r.viewpoint));
        out += ",\"appearance\":";
        append_f32_array(out, r.appearance);
        out += ",\"viewpoint_feature\":";
        append_f32_array(out, r.viewpoint_feature);
        out += "}\n";
    }
    return out;
}

std::vector<FeatureRecord> feature_records_from_jsonl(const std::string& text) {
    std::vector<FeatureRecord> records;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    size_t da = 0, dv = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        OrderedJson j = parse_json(line, "feature record line " + std::to_string(line_no));
        require_keys(j, {"record_id", "vehicle_id", "camera_id", "viewpoint",
                         "appearance", "viewpoint_feature"},
                     "feature record");
        FeatureRecord r;
        r.record_id = j.at("record_id").get<std::string>();
        r.vehicle_id = j.at("vehicle_id").get<std::string>();
        r.camera_id = j.at("camera_id").get<std::string>();
        r.viewpoint = viewpoint_from_name(j.at("viewpoint").get<std::string>());
        r.appearance = vec_from_json(j.at("appearance"));
        r.viewpoint_feature = vec_from_json(j.at("viewpoint_feature"));
        validate_unit_feature(r.appearance, "appearance", line_no);
        validate_unit_feature(r.viewpoint_feature, "viewpoint_feature", line_no);
        if (da == 0) { da = r.appearance.size(); dv = r.viewpoint_feature.size(); }
        if (r.appearance.size() != da || r.viewpoint_feature.size() != dv)
            throw data_error("feature record: inconsistent dims at line " +
                             std::to_string(line_no));
        records.push_back(std::move(r));
    }
    return records;
}

bool jsonl_is_feature_file(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        OrderedJson j = parse_json(line, "record line");
        return j.contains("appearance");
    }
    throw data_error("empty record file");
}

std::string feature_records_to_binary(const std::vector<FeatureRecord>& records) {
    std::string out;
    out += "MURF1";
    const uint32_t count = static_cast<uint32_t>(records.size());
    const uint32_t da = records.empty() ? 0 : static_cast<uint32_t>(records[0].appearance.size());
    const uint32_t dv = records.empty() ? 0 : static_cast<uint32_t>(records[0].viewpoint_feature.size());
    put_le(out, count);
    put_le(out, da);
    put_le(out, dv);
    for (const auto& r : records) {
        put_string(out, r.record_id);
        put_string(out, r.vehicle_id);
        put_string(out, r.camera_id);
        put_le<uint8_t>(out, static_cast<uint8_t>(r.viewpoint));
        for (double v : r.appearance) put_le<float>(out, static_cast<float>(v));
        for (double v : r.viewpoint_feature) put_le<float>(out, static_cast<float>(v));
    }
    return out;
}

std::vector<FeatureRecord> feature_records_from_binary(const std::string& bytes) {
    if (bytes.size() < 5 || bytes.substr(0, 5) != "MURF1")
        throw data_error("binary cache: bad magic");
    size_t pos = 5;
    const uint32_t count = get_le<uint32_t>(bytes, pos);
    const uint32_t da = get_le<uint32_t>(bytes, pos);
    const uint32_t dv = get_le<uint32_t>(bytes, pos);
    std::vector<FeatureRecord> records;
    records.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        FeatureRecord r;
        r.record_id = get_string(bytes, pos);
        r.vehicle_id = get_string(bytes, pos);
        r.camera_id = get_string(bytes, pos);
        const uint8_t v = get_le<uint8_t>(bytes, pos);
        if (v > 2) throw data_error("binary cache: bad viewpoint tag");
        r.viewpoint = static_cast<Viewpoint>(static_cast<int>(v));
        r.appearance.resize(da);
        for (uint32_t k = 0; k < da; ++k)
            r.appearance[k] = static_cast<double>(get_le<float>(bytes, pos));
        r.viewpoint_feature.resize(dv);
        for (uint32_t k = 0; k < dv; ++k)
            r.viewpoint_feature[k] = static_cast<double>(get_le<float>(bytes, pos));
        records.push_back(std::move(r));
    }
    if (pos != bytes.size())
        throw data_error("binary cache: trailing bytes");
    return records;
}

OrderedJson mlp_to_json(const MlpModel& model) {
    OrderedJson j;
    j["version"] = 1;
    j["layers"] = OrderedJson::array();
    for (const auto& layer : model.layers) {
        OrderedJson lj;
        lj["rows"] = layer.weight.rows;
        lj["cols"] = layer.weight.cols;
        lj["weights"] = layer.weight.values;
        lj["bias"] = layer.bias;
        lj["activation"] = layer.act == Activation::Relu ? "relu" : "identity";
        j["layers"].push_back(std::move(lj));
    }
    j["conditioning"] = OrderedJson::array();
    for (const auto& proj : model.conditioning) {
        OrderedJson pj;
        pj["rows"] = proj.rows;
        pj["cols"] = proj.cols;
        pj["weights"] = proj.values;
        j["conditioning"].push_back(std::move(pj));
    }
    return j;
}

MlpModel mlp_from_json(const OrderedJson& j) {
    require_keys(j, {"version", "layers", "conditioning"}, "mlp document");
    if (j.at("version").get<int>() != 1)
        throw model_error("mlp document: unsupported version");
    MlpModel model;
    for (const auto& lj : j.at("layers")) {
        require_keys(lj, {"rows", "cols", "weights", "bias", "activation"}, "mlp layer");
        Layer layer;
        layer.weight.rows = lj.at("rows").get<size_t>();
        layer.weight.cols = lj.at("cols").get<size_t>();
        layer.weight.values = vec_from_json(lj.at("weights"));
        if (layer.weight.values.size() != layer.weight.rows * layer.weight.cols)
            throw model_error("mlp layer: weight count does not match rows*cols");
        layer.bias = vec_from_json(lj.at("bias"));
        if (layer.bias.size() != layer.weight.rows)
            throw model_error("mlp layer: bias size does not match rows");
        const std::string act = lj.at("activation").get<std::string>();
        if (act == "relu") layer.act = Activation::Relu;
        else if (act == "identity") layer.act = Activation::Identity;
        else throw model_error("mlp layer: unknown activation '" + act + "'");
        model.layers.push_back(std::move(layer));
    }
    if (model.layers.empty())
        throw model_error("mlp document: no layers");
    if (j.contains("conditioning")) {
        for (const auto& pj : j.at("conditioning")) {
            require_keys(pj, {"rows", "cols", "weights"}, "conditioning projection");
            Mat proj;
            proj.rows = pj.at("rows").get<size_t>();
            proj.cols = pj.at("cols").get<size_t>();
            proj.values = vec_from_json(pj.at("weights"));
            if (proj.values.size() != proj.rows * proj.cols)
                throw model_error("conditioning projection: weight count mismatch");
            model.conditioning.push_back(std::move(proj));
        }
    }
    if (!model.conditioning.empty() &&
        model.conditioning.size() != model.layers.size())
        throw model_error("mlp document: conditioning count does not match layers");
    return model;
}

OrderedJson vcc_to_json(const VccModel& model) {
    OrderedJson inner;
    OrderedJson branch;
    branch["trunk"] = mlp_to_json(model.view_trunk);
    branch["classifier"] = mlp_to_json(model.view_head);
    inner["viewpoint_branch"] = std::move(branch);

    MlpModel app = model.app_branch;  // conditioning emitted separately
    std::vector<Mat> cond = std::move(app.conditioning);
    app.conditioning.clear();
    inner["appearance_branch"] = mlp_to_json(app);
    inner["conditioning"] = OrderedJson::array();
    for (const auto& proj : cond) {
        OrderedJson pj;
        pj["rows"] = proj.rows;
        pj["cols"] = proj.cols;
        pj["weights"] = proj.values;
        inner["conditioning"].push_back(std::move(pj));
    }
    inner["id_head"] = mlp_to_json(model.id_head);
    inner["identities"] = model.identity_vocab;
    OrderedJson j;
    j["vcc"] = std::move(inner);
    return j;
}

VccModel vcc_from_json(const OrderedJson& j) {
    if (!j.contains("vcc"))
        throw model_error("not a vcc model document");
    const OrderedJson& inner = j.at("vcc");
    require_keys(inner, {"viewpoint_branch", "appearance_branch", "conditioning",
                         "id_head", "identities"},
                 "vcc document");
    VccModel model;
    const OrderedJson& branch = inner.at("viewpoint_branch");
    require_keys(branch, {"trunk", "classifier"}, "viewpoint branch");
    model.view_trunk = mlp_from_json(branch.at("trunk"));
    model.view_head = mlp_from_json(branch.at("classifier"));
    model.app_branch = mlp_from_json(inner.at("appearance_branch"));
    for (const auto& pj : inner.at("conditioning")) {
        require_keys(pj, {"rows", "cols", "weights"}, "conditioning projection");
        Mat proj;
        proj.rows = pj.at("rows").get<size_t>();
        proj.cols = pj.at("cols").get<size_t>();
        proj.values = vec_from_json(pj.at("weights"));
        if (proj.values.size() != proj.rows * proj.cols)
            throw model_error("conditioning projection: weight count mismatch");
        model.app_branch.conditioning.push_back(std::move(proj));
    }
    if (model.app_branch.conditioning.size() != model.app_branch.layers.size())
        throw model_error("vcc document: conditioning count does not match layers");
    model.id_head = mlp_from_json(inner.at("id_head"));
    model.identity_vocab = inner.at("identities").get<std::vector<std::string>>();
    if (model.view_head.output_dim() != 3)
        throw model_error("vcc document: viewpoint classifier must have 3 outputs");
    if (model.id_head.output_dim() != model.identity_vocab.size())
        throw model_error("vcc document: id head width does not match identities");
    return model;
}

OrderedJson cvfr_to_json(const CvfrModel& model) {
    OrderedJson inner;
    inner["encoders"] = OrderedJson::array();
    inner["decoders"] = OrderedJson::array();
    for (size_t v = 0; v < 3; ++v) inner["encoders"].push_back(mlp_to_json(model.encoders[v]));
    for (size_t v = 0; v < 3; ++v) inner["decoders"].push_back(mlp_to_json(model.decoders[v]));
    inner["predictors"] = OrderedJson::array();
    for (size_t u = 0; u < 3; ++u)
        for (size_t v = 0; v < 3; ++v) {
            if (u == v) continue;
            OrderedJson pj;
            pj["from"] = viewpoint_name(static_cast<Viewpoint>(static_cast<int>(u)));
            pj["to"] = viewpoint_name(static_cast<Viewpoint>(static_cast<int>(v)));
            pj["model"] = mlp_to_json(model.predictors[u][v]);
            inner["predictors"].push_back(std::move(pj));
        }
    inner["latent_dim"] = model.latent_dim;
    inner["input_scale"] = model.input_scale;
    OrderedJson centroids;
    for (size_t v = 0; v < 3; ++v)
        centroids[viewpoint_name(static_cast<Viewpoint>(static_cast<int>(v)))] =
            model.viewpoint_centroids[v];
    inner["viewpoint_centroids"] = std::move(centroids);
    OrderedJson j;
    j["cvfr"] = std::move(inner);
    return j;
}

CvfrModel cvfr_from_json(const OrderedJson& j) {
    if (!j.contains("cvfr"))
        throw model_error("not a cvfr model document");
    const OrderedJson& inner = j.at("cvfr");
    require_keys(inner, {"encoders", "decoders", "predictors", "latent_dim",
                         "input_scale", "viewpoint_centroids"},
                 "cvfr document");
    CvfrModel model;
    if (inner.at("encoders").size() != 3 || inner.at("decoders").size() != 3)
        throw model_error("cvfr document: need exactly 3 encoders and decoders");
    for (size_t v = 0; v < 3; ++v) {
        model.encoders[v] = mlp_from_json(inner.at("encoders")[v]);
        model.decoders[v] = mlp_from_json(inner.at("decoders")[v]);
    }
    if (inner.at("predictors").size() != 6)
        throw model_error("cvfr document: need exactly 6 predictors");
    for (const auto& pj : inner.at("predictors")) {
        require_keys(pj, {"from", "to", "model"}, "cvfr predictor");
        const size_t u = static_cast<size_t>(
            viewpoint_from_name(pj.at("from").get<std::string>()));
        const size_t v = static_cast<size_t>(
            viewpoint_from_name(pj.at("to").get<std::string>()));
        if (u == v)
            throw model_error("cvfr document: predictor with identical endpoints");
        model.predictors[u][v] = mlp_from_json(pj.at("model"));
    }
    model.latent_dim = inner.at("latent_dim").get<size_t>();
    if (inner.contains("input_scale"))
        model.input_scale = inner.at("input_scale").get<double>();
    const OrderedJson& centroids = inner.at("viewpoint_centroids");
    for (size_t v = 0; v < 3; ++v) {
        const char* name = viewpoint_name(static_cast<Viewpoint>(static_cast<int>(v)));
        if (centroids.contains(name))
            model.viewpoint_centroids[v] = vec_from_json(centroids.at(name));
    }
    return model;
}

void save_vcc(const VccModel& model, const std::string& path) {
    write_text_file(path, vcc_to_json(model).dump(2) + "\n");
}

VccModel load_vcc(const std::string& path) {
    return vcc_from_json(parse_json(read_text_file(path), "vcc model " + path));
}

void save_cvfr(const CvfrModel& model, const std::string& path) {
    write_text_file(path, cvfr_to_json(model).dump(2) + "\n");
}

CvfrModel load_cvfr(const std::string& path) {
    return cvfr_from_json(parse_json(read_text_file(path), "cvfr model " + path));
}

OrderedJson parse_json(const std::string& text, const std::string& what) {
    OrderedJson j = OrderedJson::parse(text, nullptr, false);
    if (j.is_discarded())
        throw data_error(what + ": invalid JSON");
    return j;
}

SynthConfig synth_config_from_json(const OrderedJson& j) {
    require_keys(j, {"num_identities", "num_cameras", "cameras_min", "cameras_max",
                     "records_per_camera_min", "records_per_camera_max", "input_dim", "appearance_noise", "camera_style_noise",
                     "illumination", "viewpoint_offset_magnitude",
                     "viewpoint_identity_rotation", "identity_clusters",
                     "identity_cluster_spread", "train_fraction",
                     "query_fraction", "gallery_fraction", "seed"},
                 "synth config");
    SynthConfig c;
    if (j.contains("num_identities")) c.num_identities = j.at("num_identities").get<size_t>();
    if (j.contains("num_cameras")) c.num_cameras = j.at("num_cameras").get<size_t>();
    if (j.contains("cameras_min")) c.cameras_min = j.at("cameras_min").get<size_t>();
    if (j.contains("cameras_max")) c.cameras_max = j.at("cameras_max").get<size_t>();
    if (j.contains("records_per_camera_min"))
        c.records_per_camera_min = j.at("records_per_camera_min").get<size_t>();
    if (j.contains("records_per_camera_max"))
        c.records_per_camera_max = j.at("records_per_camera_max").get<size_t>();
    if (j.contains("input_dim")) c.input_dim = j.at("input_dim").get<size_t>();
    if (j.contains("appearance_noise")) c.appearance_noise = j.at("appearance_noise").get<double>();
    if (j.contains("camera_style_noise")) c.camera_style_noise = j.at("camera_style_noise").get<double>();
    if (j.contains("illumination")) {
        c.illumination.clear();
        for (const auto& [name, mag] : j.at("illumination").items())
            c.illumination.push_back({name, mag.get<double>()});
    }
    if (j.contains("viewpoint_offset_magnitude"))
        c.viewpoint_offset_magnitude = j.at("viewpoint_offset_magnitude").get<double>();
    if (j.contains("viewpoint_identity_rotation"))
        c.viewpoint_identity_rotation = j.at("viewpoint_identity_rotation").get<double>();
    if (j.contains("identity_clusters"))
        c.identity_clusters = j.at("identity_clusters").get<size_t>();
    if (j.contains("identity_cluster_spread"))
        c.identity_cluster_spread = j.at("identity_cluster_spread").get<double>();
    if (j.contains("train_fraction")) c.train_fraction = j.at("train_fraction").get<double>();
    if (j.contains("query_fraction")) c.query_fraction = j.at("query_fraction").get<double>();
    if (j.contains("gallery_fraction")) c.gallery_fraction = j.at("gallery_fraction").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    validate(c);
    return c;
}

OrderedJson synth_config_to_json(const SynthConfig& c) {
    OrderedJson j;
    j["num_identities"] = c.num_identities;
    j["num_cameras"] = c.num_cameras;
    j["cameras_min"] = c.cameras_min;
    j["cameras_max"] = c.cameras_max;
    j["records_per_camera_min"] = c.records_per_camera_min;
    j["records_per_camera_max"] = c.records_per_camera_max;
    j["input_dim"] = c.input_dim;
    j["appearance_noise"] = c.appearance_noise;
    j["camera_style_noise"] = c.camera_style_noise;
    OrderedJson illum;
    for (const auto& level : c.illumination) illum[level.name] = level.magnitude;
    j["illumination"] = std::move(illum);
    j["viewpoint_offset_magnitude"] = c.viewpoint_offset_magnitude;
    j["viewpoint_identity_rotation"] = c.viewpoint_identity_rotation;
    j["identity_clusters"] = c.identity_clusters;
    j["identity_cluster_spread"] = c.identity_cluster_spread;
    j["train_fraction"] = c.train_fraction;
    j["query_fraction"] = c.query_fraction;
    j["gallery_fraction"] = c.gallery_fraction;
    j["seed"] = c.seed;
    return j;
}

VccTrainConfig vcc_config_from_json(const OrderedJson& j) {
    require_keys(j, {"epochs", "base_lr", "warmup_fraction", "decay1_at", "decay2_at",
                     "p_identities", "k_instances", "margin", "view_hidden",
                     "view_dim", "app_hidden", "app_dim", "seed"},
                 "vcc train config");
    VccTrainConfig c;
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<size_t>();
    if (j.contains("base_lr")) c.base_lr = j.at("base_lr").get<double>();
    if (j.contains("warmup_fraction")) c.warmup_fraction = j.at("warmup_fraction").get<double>();
    if (j.contains("decay1_at")) c.decay1_at = j.at("decay1_at").get<double>();
    if (j.contains("decay2_at")) c.decay2_at = j.at("decay2_at").get<double>();
    if (j.contains("p_identities")) c.p_identities = j.at("p_identities").get<size_t>();
    if (j.contains("k_instances")) c.k_instances = j.at("k_instances").get<size_t>();
    if (j.contains("margin")) c.margin = j.at("margin").get<double>();
    if (j.contains("view_hidden")) c.view_hidden = j.at("view_hidden").get<size_t>();
    if (j.contains("view_dim")) c.view_dim = j.at("view_dim").get<size_t>();
    if (j.contains("app_hidden")) c.app_hidden = j.at("app_hidden").get<std::vector<size_t>>();
    if (j.contains("app_dim")) c.app_dim = j.at("app_dim").get<size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (c.epochs < 1) throw config_error("vcc train config: epochs must be >= 1");
    if (c.margin < 0.0) throw config_error("vcc train config: margin must be >= 0");
    return c;
}

CvfrTrainConfig cvfr_config_from_json(const OrderedJson& j) {
    require_keys(j, {"epochs", "lr", "latent_dim", "alpha", "hidden_width",
                     "hidden_layers", "input_scale", "rounds_per_identity", "seed"},
                 "cvfr train config");
    CvfrTrainConfig c;
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<size_t>();
    if (j.contains("lr")) c.lr = j.at("lr").get<double>();
    if (j.contains("latent_dim")) c.latent_dim = j.at("latent_dim").get<size_t>();
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    if (j.contains("hidden_width")) c.hidden_width = j.at("hidden_width").get<size_t>();
    if (j.contains("hidden_layers")) c.hidden_layers = j.at("hidden_layers").get<size_t>();
    if (j.contains("input_scale")) c.input_scale = j.at("input_scale").get<double>();
    if (j.contains("rounds_per_identity"))
        c.rounds_per_identity = j.at("rounds_per_identity").get<size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (c.latent_dim < 2) throw config_error("cvfr train config: latent_dim must be >= 2");
    if (c.alpha < 0.0) throw config_error("cvfr train config: alpha must be >= 0");
    return c;
}

MetricConfig metric_config_from_json(const OrderedJson& j) {
    require_keys(j, {"cmc_ranks", "epsilon", "empty_positive_policy", "suppression"},
                 "metric config");
    MetricConfig c;
    if (j.contains("cmc_ranks")) c.cmc_ranks = j.at("cmc_ranks").get<std::vector<size_t>>();
    if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
    if (j.contains("empty_positive_policy")) {
        const std::string p = j.at("empty_positive_policy").get<std::string>();
        if (p == "count_zero") c.empty_policy = EmptyPositivePolicy::CountZero;
        else if (p == "exclude") c.empty_policy = EmptyPositivePolicy::Exclude;
        else throw config_error("metric config: unknown empty_positive_policy '" + p + "'");
    }
    if (j.contains("suppression")) {
        const std::string s = j.at("suppression").get<std::string>();
        if (s == "features") c.suppression = SuppressionMode::Features;
        else if (s == "labels") c.suppression = SuppressionMode::Labels;
        else throw config_error("metric config: unknown suppression mode '" + s + "'");
    }
    if (c.epsilon <= 0.0)
        throw config_error("metric config: epsilon must be positive");
    for (size_t k : c.cmc_ranks)
        if (k == 0) throw config_error("metric config: cmc ranks must be positive");
    return c;
}

OrderedJson metric_config_to_json(const MetricConfig& c) {
    OrderedJson j;
    j["cmc_ranks"] = c.cmc_ranks;
    j["epsilon"] = c.epsilon;
    j["empty_positive_policy"] =
        c.empty_policy == EmptyPositivePolicy::CountZero ? "count_zero" : "exclude";
    j["suppression"] =
        c.suppression == SuppressionMode::Features ? "features" : "labels";
    j["cgm_definition"] = "collapse-then-ap-variant";
    return j;
}

std::string config_hash(const OrderedJson& j) {
    const std::string dump = j.dump();
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

DatasetPaths dataset_paths(const std::string& dir) {
    DatasetPaths p;
    p.train = dir + "/train.jsonl";
    p.query = dir + "/query.jsonl";
    p.gallery = dir + "/gallery.jsonl";
    p.ground_truth = dir + "/ground_truth.json";
    p.manifest = dir + "/manifest.json";
    return p;
}

namespace {

OrderedJson ground_truth_to_json(const GroundTruth& gt) {
    OrderedJson j;
    OrderedJson basis;
    for (const auto& [id, v] : gt.identity_basis) basis[id] = v;
    j["identity_basis"] = std::move(basis);
    OrderedJson offsets;
    for (const auto& [id, arr] : gt.viewpoint_offsets) {
        OrderedJson vo;
        for (size_t v = 0; v < 3; ++v)
            vo[viewpoint_name(static_cast<Viewpoint>(static_cast<int>(v)))] = arr[v];
        offsets[id] = std::move(vo);
    }
    j["viewpoint_offsets"] = std::move(offsets);
    OrderedJson styles;
    for (const auto& [id, v] : gt.camera_styles) styles[id] = v;
    j["camera_styles"] = std::move(styles);
    OrderedJson illum;
    for (const auto& [name, v] : gt.illumination_shifts) illum[name] = v;
    j["illumination_shifts"] = std::move(illum);
    return j;
}

GroundTruth ground_truth_from_json(const OrderedJson& j) {
    GroundTruth gt;
    for (const auto& [id, v] : j.at("identity_basis").items())
        gt.identity_basis[id] = vec_from_json(v);
    for (const auto& [id, vo] : j.at("viewpoint_offsets").items()) {
        std::array<Vec, 3> arr;
        for (size_t v = 0; v < 3; ++v)
            arr[v] = vec_from_json(
                vo.at(viewpoint_name(static_cast<Viewpoint>(static_cast<int>(v)))));
        gt.viewpoint_offsets[id] = std::move(arr);
    }
    for (const auto& [id, v] : j.at("camera_styles").items())
        gt.camera_styles[id] = vec_from_json(v);
    for (const auto& [name, v] : j.at("illumination_shifts").items())
        gt.illumination_shifts[name] = vec_from_json(v);
    return gt;
}

}  // namespace

void write_dataset(const SynthDataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const DatasetPaths p = dataset_paths(dir);
    write_text_file(p.train, raw_records_to_jsonl(ds.train));
    write_text_file(p.query, raw_records_to_jsonl(ds.query));
    write_text_file(p.gallery, raw_records_to_jsonl(ds.gallery));
    write_text_file(p.ground_truth, ground_truth_to_json(ds.ground_truth).dump(2) + "\n");

    const OrderedJson config_echo = synth_config_to_json(ds.config);
    OrderedJson manifest;
    manifest["seed"] = ds.config.seed;
    manifest["config_hash"] = config_hash(config_echo);
    OrderedJson files;
    files["train"] = "train.jsonl";
    files["query"] = "query.jsonl";
    files["gallery"] = "gallery.jsonl";
    files["ground_truth"] = "ground_truth.json";
    manifest["files"] = std::move(files);
    manifest["config"] = config_echo;
    write_text_file(p.manifest, manifest.dump(2) + "\n");
}

SynthDataset read_dataset(const std::string& dir) {
    const DatasetPaths p = dataset_paths(dir);
    const OrderedJson manifest = parse_json(read_text_file(p.manifest), "manifest");
    SynthDataset ds;
    ds.config = synth_config_from_json(manifest.at("config"));
    ds.train = raw_records_from_jsonl(read_text_file(p.train));
    ds.query = raw_records_from_jsonl(read_text_file(p.query));
    ds.gallery = raw_records_from_jsonl(read_text_file(p.gallery));
    ds.ground_truth = ground_truth_from_json(
        parse_json(read_text_file(p.ground_truth), "ground truth"));
    return ds;
}

std::string report_to_json_text(const EvalReport& report,
                                const OrderedJson& context) {
    OrderedJson j;
    OrderedJson config = metric_config_to_json(report.config);
    for (const auto& [key, value] : context.items()) config[key] = value;
    j["config"] = std::move(config);
    OrderedJson aggregates;
    for (const auto& [name, value] : report.aggregates) aggregates[name] = value;
    j["aggregates"] = std::move(aggregates);
    j["per_query"] = OrderedJson::array();
    for (const auto& row : report.per_query) {
        OrderedJson q;
        q["query"] = row.query_id;
        q["target"] = row.target_id;
        for (size_t r = 0; r < report.config.cmc_ranks.size(); ++r)
            q["rank" + std::to_string(report.config.cmc_ranks[r])] = row.metrics.cmc[r];
        q["ap"] = row.metrics.ap;
        q["inp"] = row.metrics.inp;
        q["cgm"] = row.metrics.cgm;
        q["csp"] = row.metrics.csp;
        q["positives"] = row.metrics.positives;
        q["csp_positives"] = row.metrics.csp_positives;
        q["flagged"] = row.metrics.flagged;
        j["per_query"].push_back(std::move(q));
    }
    return j.dump(2) + "\n";
}

namespace {

std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

std::string report_to_csv_text(const EvalReport& report) {
    std::string out = "query,target";
    for (size_t k : report.config.cmc_ranks) out += ",rank" + std::to_string(k);
    out += ",ap,inp,cgm,csp,positives,csp_positives,flagged\n";
    for (const auto& row : report.per_query) {
        out += row.query_id + "," + row.target_id;
        for (double c : row.metrics.cmc) out += "," + format_metric(c);
        out += "," + format_metric(row.metrics.ap);
        out += "," + format_metric(row.metrics.inp);
        out += "," + format_metric(row.metrics.cgm);
        out += "," + format_metric(row.metrics.csp);
        out += "," + std::to_string(row.metrics.positives);
        out += "," + std::to_string(row.metrics.csp_positives);
        out += row.metrics.flagged ? ",1\n" : ",0\n";
    }
    return out;
}

std::string vcc_trace_to_csv(const std::vector<EpochLoss>& trace) {
    std::string out = "epoch,total,view,appearance\n";
    for (size_t e = 0; e < trace.size(); ++e) {
        out += std::to_string(e + 1) + "," + format_metric(trace[e].total) + "," +
               format_metric(trace[e].view) + "," +
               format_metric(trace[e].appearance) + "\n";
    }
    return out;
}

std::string cvfr_trace_to_csv(const std::vector<double>& trace) {
    std::string out = "epoch,total\n";
    for (size_t e = 0; e < trace.size(); ++e)
        out += std::to_string(e + 1) + "," + format_metric(trace[e]) + "\n";
    return out;
}

}  // namespace mvq

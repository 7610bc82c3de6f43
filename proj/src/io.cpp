#include "naln/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "naln/errors.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace naln {

namespace {

constexpr std::uint16_t kVersion = 1;
constexpr char kMagic[4] = {'N', 'A', 'L', 'N'};

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + path);
}

}  // namespace

void write_tensor(const std::string& path, const Tensor& t, TensorDType dtype) {
    std::string out;
    out.append(kMagic, 4);
    put_u16(out, kVersion);
    out.push_back(static_cast<char>(dtype));
    if (t.rank() > 255) throw FormatError("tensor rank exceeds format limit");
    out.push_back(static_cast<char>(t.rank()));
    for (std::size_t d : t.dims()) put_u64(out, d);

    if (dtype == TensorDType::f64) {
        for (double v : t.data()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            put_u64(out, bits);
        }
    } else if (dtype == TensorDType::f32) {
        for (double v : t.data()) {
            const float f = static_cast<float>(v);
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
        }
    } else {
        throw FormatError("unknown dtype code " + std::to_string(static_cast<int>(dtype)));
    }
    write_file(path, out);
}

Tensor read_tensor(const std::string& path) {
    const std::string bytes = read_file(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::size_t len = bytes.size();

    if (len < 8) throw FormatError(path + ": header truncated (" + std::to_string(len) + " bytes)");
    if (std::memcmp(p, kMagic, 4) != 0) throw FormatError(path + ": bad magic");
    const std::uint16_t version = get_u16(p + 4);
    if (version != kVersion)
        throw FormatError(path + ": unsupported version " + std::to_string(version));
    const std::uint8_t dtype = p[6];
    if (dtype != 1 && dtype != 2) throw FormatError(path + ": unknown dtype code " + std::to_string(dtype));
    const std::size_t ndim = p[7];

    const std::size_t header = 8 + 8 * ndim;
    if (len < header) throw FormatError(path + ": dims truncated");

    std::vector<std::size_t> dims(ndim);
    std::uint64_t count = 1;
    for (std::size_t i = 0; i < ndim; ++i) {
        const std::uint64_t d = get_u64(p + 8 + 8 * i);
        dims[i] = static_cast<std::size_t>(d);
        if (d != 0 && count > UINT64_MAX / d) throw FormatError(path + ": dimension product overflows");
        count *= d;
    }

    const std::size_t item = (dtype == 2) ? 8 : 4;
    if (count > (UINT64_MAX - header) / item) throw FormatError(path + ": payload size overflows");
    const std::uint64_t expected = count * item;
    const std::uint64_t actual = len - header;
    if (actual != expected)
        throw FormatError(path + ": payload mismatch, expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(actual));

    std::vector<double> data(static_cast<std::size_t>(count));
    const unsigned char* q = p + header;
    if (dtype == 2) {
        for (std::size_t i = 0; i < count; ++i) {
            const std::uint64_t bits = get_u64(q + 8 * i);
            double v;
            std::memcpy(&v, &bits, 8);
            data[i] = v;
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(q[4 * i + b]) << (8 * b);
            float f;
            std::memcpy(&f, &bits, 4);
            data[i] = static_cast<double>(f);
        }
    }
    return Tensor::from(std::move(dims), std::move(data));
}

// --- manifest ----------------------------------------------------------------

namespace {

void require_keys(const json& j, const std::set<std::string>& required, const std::set<std::string>& optional,
                  const std::string& context) {
    if (!j.is_object()) throw FormatError("manifest: " + context + " must be an object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!required.count(key) && !optional.count(key))
            throw FormatError("manifest: unknown key \"" + key + "\" in " + context);
    }
    for (const std::string& key : required)
        if (!j.contains(key)) throw FormatError("manifest: missing key \"" + key + "\" in " + context);
}

template <class T>
T field(const json& j, const std::string& key, const std::string& context) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw FormatError("manifest: bad value for \"" + key + "\" in " + context);
    }
}

json training_to_json(const TrainConfig& t) {
    return json{{"batch_size", t.batch_size},     {"learning_rate", t.learning_rate},
                {"max_epochs", t.max_epochs},     {"patience", t.patience},
                {"seed", t.seed},                 {"temperature", t.temperature},
                {"val_fraction", t.val_fraction}};
}

TrainConfig training_from_json(const json& j) {
    require_keys(j, {"batch_size", "learning_rate", "max_epochs", "patience", "seed", "temperature",
                     "val_fraction"},
                 {}, "training");
    TrainConfig t;
    t.batch_size = field<std::size_t>(j, "batch_size", "training");
    t.learning_rate = field<double>(j, "learning_rate", "training");
    t.max_epochs = field<std::size_t>(j, "max_epochs", "training");
    t.patience = field<std::size_t>(j, "patience", "training");
    t.seed = field<std::uint64_t>(j, "seed", "training");
    t.temperature = field<double>(j, "temperature", "training");
    t.val_fraction = field<double>(j, "val_fraction", "training");
    return t;
}

}  // namespace

std::string Manifest::resolve(const std::string& relative) const {
    fs::path p(relative);
    if (p.is_absolute() || base_dir.empty()) return relative;
    return (fs::path(base_dir) / p).string();
}

std::string manifest_to_text(const Manifest& m) {
    json dataset{{"channel_names", m.channel_names},
                 {"embeddings", m.embeddings},
                 {"epochs", m.epochs_path},
                 {"labels", m.labels_path},
                 {"sample_rate_hz", m.sample_rate_hz}};
    if (m.repetitions_path) dataset["repetitions"] = *m.repetitions_path;
    json root{{"dataset", dataset},
              {"outputs", json{{"checkpoint_dir", m.checkpoint_dir}, {"report_dir", m.report_dir}}},
              {"training", training_to_json(m.training)}};
    return root.dump(2) + "\n";
}

void save_manifest(const Manifest& m, const std::string& path) { write_file(path, manifest_to_text(m)); }

Manifest load_manifest(const std::string& path) {
    json root;
    try {
        root = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw FormatError("manifest " + path + ": " + e.what());
    }
    require_keys(root, {"dataset", "outputs", "training"}, {}, "root");
    const json& ds = root.at("dataset");
    require_keys(ds, {"channel_names", "embeddings", "epochs", "labels", "sample_rate_hz"},
                 {"repetitions"}, "dataset");
    const json& outs = root.at("outputs");
    require_keys(outs, {"checkpoint_dir", "report_dir"}, {}, "outputs");

    Manifest m;
    m.base_dir = fs::path(path).parent_path().string();
    m.channel_names = field<std::vector<std::string>>(ds, "channel_names", "dataset");
    m.embeddings = field<std::map<std::string, std::string>>(ds, "embeddings", "dataset");
    m.epochs_path = field<std::string>(ds, "epochs", "dataset");
    m.labels_path = field<std::string>(ds, "labels", "dataset");
    m.sample_rate_hz = field<double>(ds, "sample_rate_hz", "dataset");
    if (ds.contains("repetitions")) m.repetitions_path = field<std::string>(ds, "repetitions", "dataset");
    m.training = training_from_json(root.at("training"));
    m.checkpoint_dir = field<std::string>(outs, "checkpoint_dir", "outputs");
    m.report_dir = field<std::string>(outs, "report_dir", "outputs");

    if (!(m.sample_rate_hz > 0.0)) throw FormatError("manifest: sample_rate_hz must be positive");
    m.training.validate();

    auto must_exist = [&](const std::string& rel, const std::string& role) {
        if (!fs::exists(m.resolve(rel)))
            throw DataError("manifest: " + role + " file \"" + rel + "\" does not exist");
    };
    must_exist(m.epochs_path, "epochs");
    must_exist(m.labels_path, "labels");
    if (m.repetitions_path) must_exist(*m.repetitions_path, "repetitions");
    for (const auto& [name, file] : m.embeddings) must_exist(file, "embeddings[" + name + "]");
    return m;
}

// --- dataset marshalling -------------------------------------------------------

EpochSet load_epoch_set(const Manifest& m) {
    EpochSet set;
    set.epochs = read_tensor(m.resolve(m.epochs_path));
    set.sample_rate_hz = m.sample_rate_hz;

    Tensor labels = read_tensor(m.resolve(m.labels_path));
    if (labels.rank() != 1)
        throw FormatError("labels file must hold a vector, got " + dims_to_string(labels.dims()));
    set.labels.reserve(labels.size());
    for (double v : labels.data()) set.labels.push_back(static_cast<int>(std::llround(v)));

    if (m.repetitions_path) {
        Tensor reps = read_tensor(m.resolve(*m.repetitions_path));
        if (reps.rank() != 1)
            throw FormatError("repetitions file must hold a vector, got " + dims_to_string(reps.dims()));
        for (double v : reps.data()) set.repetition_index.push_back(static_cast<int>(std::llround(v)));
    } else {
        set.repetition_index.assign(set.labels.size(), 0);
    }
    set.validate();
    return set;
}

void save_epoch_set(const EpochSet& set, const std::string& epochs_path, const std::string& labels_path,
                    const std::string& repetitions_path) {
    set.validate();
    write_tensor(epochs_path, set.epochs);
    Tensor labels = Tensor::zeros({set.labels.size()});
    for (std::size_t i = 0; i < set.labels.size(); ++i) labels.mutable_data()[i] = set.labels[i];
    write_tensor(labels_path, labels);
    if (!repetitions_path.empty()) {
        Tensor reps = Tensor::zeros({set.repetition_index.size()});
        for (std::size_t i = 0; i < set.repetition_index.size(); ++i)
            reps.mutable_data()[i] = set.repetition_index[i];
        write_tensor(repetitions_path, reps);
    }
}

EmbeddingSet load_embedding_set(const std::string& path) {
    EmbeddingSet set;
    set.vectors = read_tensor(path);
    if (set.vectors.rank() != 2)
        throw FormatError(path + ": embeddings must be n×d, got " + dims_to_string(set.vectors.dims()));
    set.ids.resize(set.vectors.dim(0));
    for (std::size_t i = 0; i < set.ids.size(); ++i) set.ids[i] = static_cast<int>(i);
    set.validate();
    return set;
}

void save_embedding_set(const EmbeddingSet& set, const std::string& path) {
    set.validate();
    write_tensor(path, set.vectors);
}

// --- checkpoints ----------------------------------------------------------------

namespace {

json config_to_json(const EncoderConfig& c) {
    return json{{"depth", c.depth},
                {"embed_dim", c.embed_dim},
                {"family", family_name(c.family)},
                {"hidden_width", c.hidden_width},
                {"input_channels", c.input_channels},
                {"input_samples", c.input_samples},
                {"pool_width", c.pool_width},
                {"second_filters", c.second_filters},
                {"second_kernel", c.second_kernel},
                {"seed", c.seed},
                {"spatial_filters", c.spatial_filters},
                {"temporal_filters", c.temporal_filters},
                {"temporal_kernel", c.temporal_kernel}};
}

EncoderConfig config_from_json(const json& j) {
    require_keys(j,
                 {"depth", "embed_dim", "family", "hidden_width", "input_channels", "input_samples",
                  "pool_width", "second_filters", "second_kernel", "seed", "spatial_filters",
                  "temporal_filters", "temporal_kernel"},
                 {}, "config");
    EncoderConfig c;
    c.family = family_from_name(field<std::string>(j, "family", "config"));
    c.depth = field<std::size_t>(j, "depth", "config");
    c.embed_dim = field<std::size_t>(j, "embed_dim", "config");
    c.hidden_width = field<std::size_t>(j, "hidden_width", "config");
    c.input_channels = field<std::size_t>(j, "input_channels", "config");
    c.input_samples = field<std::size_t>(j, "input_samples", "config");
    c.pool_width = field<std::size_t>(j, "pool_width", "config");
    c.second_filters = field<std::size_t>(j, "second_filters", "config");
    c.second_kernel = field<std::size_t>(j, "second_kernel", "config");
    c.seed = field<std::uint64_t>(j, "seed", "config");
    c.spatial_filters = field<std::size_t>(j, "spatial_filters", "config");
    c.temporal_filters = field<std::size_t>(j, "temporal_filters", "config");
    c.temporal_kernel = field<std::size_t>(j, "temporal_kernel", "config");
    return c;
}

}  // namespace

void save_checkpoint(const std::string& dir, const EncoderParams& params) {
    if (!params.all_finite()) throw DataError("checkpoint refused: non-finite parameter values");
    fs::create_directories(dir);
    json names = json::array();
    for (const auto& [name, tensor] : params.parameters) {
        (void)tensor;
        names.push_back(name);
    }
    json arch{{"config", config_to_json(params.config)}, {"parameters", names}};
    write_file((fs::path(dir) / "arch.json").string(), arch.dump(2) + "\n");
    for (const auto& [name, tensor] : params.parameters)
        write_tensor((fs::path(dir) / (name + ".naln")).string(), tensor);
}

EncoderParams load_checkpoint(const std::string& dir) {
    json arch;
    try {
        arch = json::parse(read_file((fs::path(dir) / "arch.json").string()));
    } catch (const json::exception& e) {
        throw FormatError("checkpoint " + dir + ": " + e.what());
    }
    require_keys(arch, {"config", "parameters"}, {}, "arch");
    EncoderParams params;
    params.config = config_from_json(arch.at("config"));
    params.config.validate();

    const auto names = field<std::vector<std::string>>(arch, "parameters", "arch");
    for (const std::string& name : names)
        params.parameters.emplace_back(name, read_tensor((fs::path(dir) / (name + ".naln")).string()));

    // shape check against a fresh init of the same architecture
    EncoderParams reference = init_params(params.config);
    if (reference.parameters.size() != params.parameters.size())
        throw FormatError("checkpoint " + dir + ": parameter count does not match architecture");
    for (std::size_t i = 0; i < reference.parameters.size(); ++i) {
        if (reference.parameters[i].first != params.parameters[i].first ||
            reference.parameters[i].second.dims() != params.parameters[i].second.dims())
            throw FormatError("checkpoint " + dir + ": parameter \"" + params.parameters[i].first +
                              "\" does not match architecture");
    }
    if (!params.all_finite()) throw DataError("checkpoint " + dir + ": non-finite parameter values");
    return params;
}

}  // namespace naln

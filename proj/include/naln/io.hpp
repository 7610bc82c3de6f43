#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "naln/embedding.hpp"
#include "naln/encoders.hpp"
#include "naln/preproc.hpp"
#include "naln/tensor.hpp"
#include "naln/train_config.hpp"

namespace naln {

// Tensor file layout (little-endian, normative):
//   magic "NALN" | version u16 | dtype u8 (1 = binary32, 2 = binary64)
//   | ndim u8 | dims u64 each | row-major payload
// binary64 round-trips bit-exactly; binary32 is for ingesting external
// embedding exports and promotes to binary64 on read.
enum class TensorDType : std::uint8_t { f32 = 1, f64 = 2 };

void write_tensor(const std::string& path, const Tensor& t, TensorDType dtype = TensorDType::f64);
Tensor read_tensor(const std::string& path);

// Dataset + training + output descriptor, stored as strict JSON: unknown keys
// are rejected and every referenced input file must exist at load time.
// Relative paths resolve against the manifest's directory.
struct Manifest {
    std::string epochs_path;
    std::string labels_path;
    std::optional<std::string> repetitions_path;
    std::map<std::string, std::string> embeddings;  // encoder name -> tensor file
    double sample_rate_hz = 0.0;
    std::vector<std::string> channel_names;
    TrainConfig training;
    std::string checkpoint_dir;
    std::string report_dir;

    std::string base_dir;  // set by load_manifest; not serialized
    std::string resolve(const std::string& relative) const;
};

Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& m, const std::string& path);
std::string manifest_to_text(const Manifest& m);

// Assembles an EpochSet from the files a manifest names. Labels are stored as
// a length-n tensor; repetition indices default to zero when absent.
EpochSet load_epoch_set(const Manifest& m);
void save_epoch_set(const EpochSet& set, const std::string& epochs_path, const std::string& labels_path,
                    const std::string& repetitions_path = "");

// Embedding files hold an n×d matrix; row ids are the row indices.
EmbeddingSet load_embedding_set(const std::string& path);
void save_embedding_set(const EmbeddingSet& set, const std::string& path);

// Checkpoint = directory with arch.json (config + parameter name order) and
// one binary64 tensor file per parameter.
void save_checkpoint(const std::string& dir, const EncoderParams& params);
EncoderParams load_checkpoint(const std::string& dir);

}  // namespace naln

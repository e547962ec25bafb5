#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "nuer/encoder.hpp"
#include "nuer/errors.hpp"
#include "nuer/sha256.hpp"

namespace nuer {

using ordered_json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian float32");

namespace {
const char* kCkptFormat = "nuer-ckpt-v1";

ordered_json config_to_json(const EncoderConfig& c) {
  ordered_json j;
  j["d_model"] = c.d_model;
  j["n_layers"] = c.n_layers;
  j["n_heads"] = c.n_heads;
  j["d_ffn"] = c.d_ffn;
  j["max_len"] = c.max_len;
  j["vocab_size"] = c.vocab_size;
  j["dropout"] = c.dropout;
  j["seed"] = c.seed;
  return j;
}

EncoderConfig config_from_json(const ordered_json& j) {
  EncoderConfig c;
  c.d_model = j.at("d_model").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_ffn = j.at("d_ffn").get<int>();
  c.max_len = j.at("max_len").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

}  // namespace

void save_checkpoint(const EncoderModel& model, const std::string& path) {
  const auto named = model.named_params();

  std::string blob;
  ordered_json tensors = ordered_json::array();
  size_t offset = 0;
  for (const auto& [name, tensor] : named) {
    ordered_json tj;
    tj["name"] = name;
    tj["shape"] = tensor->shape;
    tj["offset"] = offset;
    tj["len"] = tensor->count();
    tensors.push_back(tj);
    for (double v : tensor->values) {
      const float f = static_cast<float>(v);
      char bytes[4];
      std::memcpy(bytes, &f, 4);
      blob.append(bytes, 4);
    }
    offset += tensor->count();
  }

  ordered_json header;
  header["format"] = kCkptFormat;
  header["config"] = config_to_json(model.config);
  header["vocab_sha256"] = model.vocab_hash;
  header["tensors"] = tensors;
  header["blob_sha256"] = sha256_hex(blob.data(), blob.size());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out << header.dump() << "\n" << blob;
  if (!out) throw IoError("write failed: " + path);
}

EncoderModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::string header_line;
  if (!std::getline(in, header_line))
    throw SchemaError(path + ": truncated checkpoint (missing header)");
  ordered_json header;
  try {
    header = ordered_json::parse(header_line);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path + ": invalid checkpoint header: " + e.what());
  }
  if (!header.contains("format") || header["format"] != kCkptFormat)
    throw SchemaError(path + ": checkpoint version mismatch (expected nuer-ckpt-v1)");

  EncoderModel model = init_model(config_from_json(header.at("config")));
  model.vocab_hash = header.value("vocab_sha256", "");

  // Attach heads implied by the manifest before binding tensors.
  const auto& tensors = header.at("tensors");
  auto manifest_has = [&](const std::string& name) {
    for (const auto& tj : tensors)
      if (tj.at("name") == name) return true;
    return false;
  };
  if (manifest_has("tag.w")) attach_tag_head(model);
  if (manifest_has("qa.start_w")) attach_qa_heads(model);
  if (manifest_has("fitb.w")) {
    int v = 0;
    int width = 0;
    for (const auto& tj : tensors) {
      if (tj.at("name") == "fitb.w") {
        const auto shape = tj.at("shape").get<std::vector<int>>();
        if (shape.size() != 2) throw SchemaError(path + ": fitb.w must be 2-dimensional");
        width = shape[0];
        v = shape[1];
      }
    }
    if (width != model.config.d_model && width != 2 * model.config.d_model)
      throw SchemaError(path + ": fitb.w width does not match the model dimension");
    attach_fitb_head(model, v, width == 2 * model.config.d_model);
  }

  auto named = model.named_params();
  if (tensors.size() != named.size())
    throw SchemaError(path + ": tensor manifest does not match the model layout");

  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  size_t expected_floats = 0;
  for (const auto& tj : tensors) expected_floats += tj.at("len").get<size_t>();
  if (blob.size() < expected_floats * 4)
    throw SchemaError(path + ": truncated checkpoint blob (" + std::to_string(blob.size()) +
                      " bytes, expected " + std::to_string(expected_floats * 4) + ")");
  if (blob.size() > expected_floats * 4)
    throw SchemaError(path + ": trailing bytes after checkpoint blob");
  if (header.contains("blob_sha256") &&
      header["blob_sha256"].get<std::string>() != sha256_hex(blob.data(), blob.size()))
    throw SchemaError(path + ": checkpoint hash mismatch (corrupt blob)");

  for (size_t i = 0; i < named.size(); ++i) {
    const auto& tj = tensors[i];
    auto& [name, tensor] = named[i];
    if (tj.at("name").get<std::string>() != name)
      throw SchemaError(path + ": unexpected tensor \"" + tj.at("name").get<std::string>() +
                        "\", expected \"" + name + "\"");
    if (tj.at("shape").get<std::vector<int>>() != tensor->shape)
      throw SchemaError(path + ": shape mismatch for tensor \"" + name + "\"");
    const size_t offset = tj.at("offset").get<size_t>();
    if (tj.at("len").get<size_t>() != tensor->count())
      throw SchemaError(path + ": length mismatch for tensor \"" + name + "\"");
    for (size_t k = 0; k < tensor->count(); ++k) {
      float f;
      std::memcpy(&f, blob.data() + (offset + k) * 4, 4);
      tensor->values[k] = static_cast<double>(f);
    }
  }
  return model;
}

}  // namespace nuer

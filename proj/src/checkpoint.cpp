#include "advlab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "advlab/error.hpp"

namespace advlab {

namespace {

constexpr char kMagic[4] = {'A', 'D', 'V', 'L'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64_block(std::string& out, const std::vector<double>& vals) {
  for (double d : vals) {
    const auto u = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
  }
}

// Bounded reader over the raw file bytes; every read is length-checked so a
// truncated file fails loudly instead of yielding garbage.
struct Reader {
  const std::string& buf;
  const std::string& path;
  size_t pos = 0;

  void need(size_t n) const {
    if (pos + n > buf.size()) throw FormatError("truncated checkpoint: " + path);
  }
  std::uint16_t u16() {
    need(2);
    const auto a = static_cast<std::uint8_t>(buf[pos]), b = static_cast<std::uint8_t>(buf[pos + 1]);
    pos += 2;
    return static_cast<std::uint16_t>(a | (b << 8));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::vector<double> f64_block(size_t count) {
    need(count * 8);
    std::vector<double> out(count);
    for (size_t k = 0; k < count; ++k) {
      std::uint64_t u = 0;
      for (int i = 0; i < 8; ++i) {
        u |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos + k * 8 + i])) << (8 * i);
      }
      out[k] = std::bit_cast<double>(u);
    }
    pos += count * 8;
    return out;
  }
};

nlohmann::ordered_json layout_to_json(const std::vector<ParamDesc>& layout) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& d : layout) arr.push_back({{"name", d.name}, {"shape", d.shape}});
  return arr;
}

std::vector<ParamDesc> layout_from_json(const nlohmann::json& arr, const std::string& path) {
  std::vector<ParamDesc> layout;
  if (!arr.is_array()) throw FormatError("checkpoint layout is not an array: " + path);
  for (const auto& e : arr) {
    ParamDesc d;
    d.name = e.at("name").get<std::string>();
    d.shape = e.at("shape").get<Shape>();
    layout.push_back(std::move(d));
  }
  return layout;
}

long long layout_numel(const std::vector<ParamDesc>& layout) {
  long long n = 0;
  for (const auto& d : layout) n += shape_numel(d.shape);
  return n;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::ordered_json header;
  header["model"] = {{"input_dim", ckpt.model_spec.input_dim},
                     {"hidden_dims", ckpt.model_spec.hidden_dims},
                     {"output_dim", ckpt.model_spec.output_dim},
                     {"activation", activation_to_string(ckpt.model_spec.activation)}};
  header["layout"] = layout_to_json(ckpt.params.layout);
  nlohmann::ordered_json blocks = nlohmann::ordered_json::array();
  blocks.push_back("params");
  if (ckpt.velocity) blocks.push_back("velocity");
  if (ckpt.best) blocks.push_back("best_params");
  header["blocks"] = blocks;
  header["meta"] = {{"epoch", ckpt.epoch}};
  if (ckpt.best) {
    header["meta"]["best"] = {{"epoch", ckpt.best->epoch},
                              {"clean_acc", ckpt.best->clean_acc},
                              {"robust_acc", ckpt.best->robust_acc}};
  }

  const std::string json_bytes = header.dump();
  std::string out;
  out.append(kMagic, 4);
  put_u16(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(json_bytes.size()));
  out += json_bytes;
  put_f64_block(out, ckpt.params.values);
  if (ckpt.velocity) put_f64_block(out, *ckpt.velocity);
  if (ckpt.best) put_f64_block(out, ckpt.best->params.values);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open checkpoint for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  f.flush();
  if (!f) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("failed reading checkpoint: " + path);

  Reader r{buf, path};
  r.need(4);
  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw FormatError("bad checkpoint magic in " + path);
  }
  r.pos = 4;
  const std::uint16_t version = r.u16();
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) +
                      " in " + path + " (expected " + std::to_string(kVersion) + ")");
  }
  const std::uint32_t json_len = r.u32();
  r.need(json_len);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.substr(r.pos, json_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad checkpoint header in " + path + ": " + e.what());
  }
  r.pos += json_len;

  Checkpoint ckpt;
  try {
    const auto& m = header.at("model");
    ckpt.model_spec.input_dim = m.at("input_dim").get<int>();
    ckpt.model_spec.hidden_dims = m.at("hidden_dims").get<std::vector<int>>();
    ckpt.model_spec.output_dim = m.at("output_dim").get<int>();
    ckpt.model_spec.activation = activation_from_string(m.at("activation").get<std::string>());
    ckpt.params.layout = layout_from_json(header.at("layout"), path);
    ckpt.epoch = header.at("meta").at("epoch").get<int>();

    const auto nparams = static_cast<size_t>(layout_numel(ckpt.params.layout));
    for (const auto& block : header.at("blocks")) {
      const std::string name = block.get<std::string>();
      if (name == "params") {
        ckpt.params.values = r.f64_block(nparams);
      } else if (name == "velocity") {
        ckpt.velocity = r.f64_block(nparams);
      } else if (name == "best_params") {
        BestState best;
        const auto& bj = header.at("meta").at("best");
        best.epoch = bj.at("epoch").get<int>();
        best.clean_acc = bj.at("clean_acc").get<double>();
        best.robust_acc = bj.at("robust_acc").get<double>();
        best.params.layout = ckpt.params.layout;
        best.params.values = r.f64_block(nparams);
        ckpt.best = std::move(best);
      } else {
        throw FormatError("unknown checkpoint block '" + name + "' in " + path);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad checkpoint header in " + path + ": " + e.what());
  }
  if (ckpt.params.values.empty() && layout_numel(ckpt.params.layout) > 0) {
    throw FormatError("checkpoint lists no params block: " + path);
  }
  return ckpt;
}

}  // namespace advlab

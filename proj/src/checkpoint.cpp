#include "synplug/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads assume a little-endian host");

namespace synplug {

using nlohmann::json;

namespace {
constexpr char kB64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}
}  // namespace

std::string base64_encode(const unsigned char* data, std::size_t n) {
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  for (std::size_t i = 0; i < n; i += 3) {
    unsigned int v = data[i] << 16;
    if (i + 1 < n) v |= data[i + 1] << 8;
    if (i + 2 < n) v |= data[i + 2];
    out.push_back(kB64Chars[(v >> 18) & 63]);
    out.push_back(kB64Chars[(v >> 12) & 63]);
    out.push_back(i + 1 < n ? kB64Chars[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < n ? kB64Chars[v & 63] : '=');
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw ValidationError("base64: length not a multiple of 4");
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      char c = text[i + k];
      if (c == '=') {
        if (k < 2 || (k == 2 && text[i + 3] != '=')) throw ValidationError("base64: bad padding");
        vals[k] = 0;
        ++pad;
      } else {
        vals[k] = b64_value(c);
        if (vals[k] < 0) throw ValidationError(std::string("base64: bad character '") + c + "'");
        if (pad) throw ValidationError("base64: data after padding");
      }
    }
    unsigned int v = (vals[0] << 18) | (vals[1] << 12) | (vals[2] << 6) | vals[3];
    out.push_back((v >> 16) & 0xff);
    if (pad < 2) out.push_back((v >> 8) & 0xff);
    if (pad < 1) out.push_back(v & 0xff);
  }
  return out;
}

json params_to_json(const std::vector<ad::Parameter*>& params) {
  json arr = json::array();
  for (const ad::Parameter* p : params) {
    json e;
    e["name"] = p->name;
    e["shape"] = p->value.shape();
    e["trainable"] = p->trainable;
    e["data"] = base64_encode(reinterpret_cast<const unsigned char*>(p->value.data()),
                              p->value.numel() * sizeof(double));
    arr.push_back(std::move(e));
  }
  return arr;
}

void params_from_json(const json& j, const std::vector<ad::Parameter*>& params) {
  if (!j.is_array() || j.size() != params.size())
    throw ValidationError("checkpoint: expected " + std::to_string(params.size()) +
                          " parameters, found " + std::to_string(j.size()));
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Parameter& p = *params[k];
    const json& e = j[k];
    if (e.value("name", "") != p.name)
      throw ValidationError("checkpoint: parameter " + std::to_string(k) + " is \"" +
                            e.value("name", "") + "\", expected \"" + p.name + "\"");
    std::vector<std::size_t> shape = e.at("shape").get<std::vector<std::size_t>>();
    if (shape != p.value.shape())
      throw ValidationError("checkpoint: shape mismatch for \"" + p.name + "\"");
    std::vector<unsigned char> bytes = base64_decode(e.at("data").get<std::string>());
    if (bytes.size() != p.value.numel() * sizeof(double))
      throw ValidationError("checkpoint: payload size mismatch for \"" + p.name + "\"");
    std::memcpy(p.value.data(), bytes.data(), bytes.size());
    p.trainable = e.value("trainable", true);
    p.grad = ad::Tensor(p.value.shape());
  }
}

json vocab_to_json(const Vocab& v) { return json(v.symbols()); }

Vocab vocab_from_json(const json& j) {
  return Vocab::from_symbols(j.get<std::vector<std::string>>());
}

void save_checkpoint(const std::filesystem::path& path, const std::string& model_type,
                     json body) {
  body["magic"] = kCheckpointMagic;
  body["version"] = kCheckpointVersion;
  body["model_type"] = model_type;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path.string());
  out << body.dump() << "\n";
}

json load_checkpoint(const std::filesystem::path& path, const std::string& model_type) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed checkpoint JSON: " + e.what());
  }
  if (j.value("magic", "") != kCheckpointMagic)
    throw ValidationError(path.string() + ": not a checkpoint (bad magic)");
  if (j.value("version", -1) != kCheckpointVersion)
    throw ValidationError(path.string() + ": unsupported checkpoint version");
  if (j.value("model_type", "") != model_type)
    throw ValidationError(path.string() + ": model_type is \"" + j.value("model_type", "") +
                          "\", expected \"" + model_type + "\"");
  return j;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace synplug

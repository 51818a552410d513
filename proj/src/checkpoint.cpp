#include "molbuild/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <zlib.h>

#include "molbuild/error.hpp"

namespace molbuild {

namespace {

constexpr char kMagic[4] = {'G', 'X', 'F', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)])) << (8 * i);
  return v;
}

std::uint32_t crc(const std::string& bytes, std::size_t length) {
  uLong value = crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < length) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(length - done, 1u << 30));
    value = crc32(value, reinterpret_cast<const Bytef*>(bytes.data() + done), chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(value);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::CorruptCheckpoint, "cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

[[noreturn]] void corrupt(const std::string& why) { throw Error(ErrorKind::CorruptCheckpoint, why); }

}  // namespace

void save_checkpoint(const std::string& path, const Policy<float>& policy, const Alphabet& alphabet) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : policy.layout().tensors()) tensors.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}});
  const nlohmann::json manifest = {{"config", policy.config().to_json()},
                                   {"alphabet", alphabet.to_json()},
                                   {"alphabet_hash", alphabet.hash()},
                                   {"tensors", tensors}};
  const std::string text = manifest.dump();
  std::string out(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (float v : policy.params()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  put_u32(out, crc(out, out.size()));
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorKind::InvalidArgument, "cannot write checkpoint '" + path + "'");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw Error(ErrorKind::InvalidArgument, "failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) corrupt("bad magic or truncated header");
  if (get_u32(bytes, bytes.size() - 4) != crc(bytes, bytes.size() - 4)) corrupt("CRC mismatch");
  const std::size_t manifest_len = get_u32(bytes, 4);
  if (8 + manifest_len + 4 > bytes.size()) corrupt("manifest length exceeds file size");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(8, manifest_len));
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("manifest is not valid JSON: ") + e.what());
  }
  Checkpoint ck;
  try {
    ck.alphabet = Alphabet::from_json(manifest.at("alphabet"));
    if (manifest.at("alphabet_hash").get<std::string>() != ck.alphabet.hash()) corrupt("alphabet digest mismatch");
    const auto& cfg = manifest.at("config");
    ck.config = PolicyConfig::from_json(cfg, cfg.at("k").get<int>(), cfg.at("y").get<int>(),
                                        cfg.at("max_degree").get<int>());
  } catch (const nlohmann::json::exception& e) {
    corrupt(std::string("malformed manifest: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::CorruptCheckpoint) throw;
    corrupt(e.what());
  }
  const ParamLayout layout(ck.config);
  const auto& tensors = manifest.at("tensors");
  if (!tensors.is_array() || tensors.size() != layout.tensors().size()) corrupt("tensor count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& t = layout.tensors()[i];
    const auto shape = tensors[i].at("shape").get<std::vector<std::size_t>>();
    if (tensors[i].at("name").get<std::string>() != t.name || shape.size() != 2 || shape[0] != t.rows ||
        shape[1] != t.cols)
      corrupt("tensor '" + t.name + "' shape mismatch");
  }
  const std::size_t data_at = 8 + manifest_len;
  if (bytes.size() - 4 - data_at != layout.total() * 4) corrupt("payload size mismatch");
  ck.params.resize(layout.total());
  for (std::size_t i = 0; i < layout.total(); ++i) ck.params[i] = std::bit_cast<float>(get_u32(bytes, data_at + 4 * i));
  return ck;
}

Checkpoint load_checkpoint(const std::string& path, const Alphabet& expected) {
  Checkpoint ck = load_checkpoint(path);
  if (!(ck.alphabet == expected))
    throw Error(ErrorKind::AlphabetMismatch, "checkpoint alphabet " + ck.alphabet.hash() +
                                                 " does not match the configured alphabet " + expected.hash());
  return ck;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open '" + path + "'");
  const std::string bytes(std::istreambuf_iterator<char>(in), {});
  std::ostringstream out;
  out << std::hex;
  out.width(8);
  out.fill('0');
  out << crc(bytes, bytes.size());
  return out.str();
}

}  // namespace molbuild

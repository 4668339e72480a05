#include "pan/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "pan/error.hpp"

namespace pan {

namespace {

constexpr std::array<char, 4> kMagic{'P', 'A', 'N', 'W'};
constexpr std::uint32_t kVersion = 1;
constexpr std::string_view kBufferPrefix = "buffer:";

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename T>
T get(std::istream& in) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) throw Error(ErrorCode::BadCheckpoint, "truncated checkpoint");
    value |= static_cast<T>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return value;
}

std::string get_string(std::istream& in, std::size_t length) {
  if (length > (std::size_t{1} << 30)) throw Error(ErrorCode::BadCheckpoint, "implausible string length");
  std::string s(length, '\0');
  in.read(s.data(), static_cast<std::streamsize>(length));
  if (!in) throw Error(ErrorCode::BadCheckpoint, "truncated checkpoint");
  return s;
}

void put_block(std::ostream& out, const std::string& name, const DenseMatrix& m) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint32_t>(out, 2);
  put<std::uint64_t>(out, m.rows());
  put<std::uint64_t>(out, m.cols());
  for (double x : m.data()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
}

}  // namespace

void write_checkpoint(std::ostream& out, const Model& model) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  nlohmann::json header = config_to_json(model.config());
  header["node_cardinalities"] = model.node_cardinalities();
  header["edge_cardinalities"] = model.edge_cardinalities();
  const std::string text = header.dump();
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  const auto buffers = model.buffers();
  put<std::uint64_t>(out, model.parameters().size() + buffers.size());
  for (const auto& p : model.parameters()) put_block(out, p.name, p.value);
  for (const auto& [name, m] : buffers) put_block(out, std::string(kBufferPrefix) + name, *m);
}

Model read_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error(ErrorCode::BadCheckpoint, "missing PANW magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) throw Error(ErrorCode::BadCheckpoint, "unsupported version " + std::to_string(version));

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(get_string(in, get<std::uint64_t>(in)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadCheckpoint, std::string("config header: ") + e.what());
  }
  if (!header.is_object()) throw Error(ErrorCode::BadCheckpoint, "config header is not an object");
  std::vector<std::size_t> node_cards, edge_cards;
  try {
    node_cards = header.at("node_cardinalities").get<std::vector<std::size_t>>();
    edge_cards = header.at("edge_cardinalities").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BadCheckpoint, std::string("cardinalities: ") + e.what());
  }
  header.erase("node_cardinalities");
  header.erase("edge_cardinalities");
  ModelConfig config;
  try {
    config = config_from_json(header);
  } catch (const Error& e) {
    throw Error(ErrorCode::BadCheckpoint, e.what());
  }
  Model model(config, node_cards, edge_cards);

  std::map<std::string, DenseMatrix*> targets;
  for (auto& p : model.parameters()) targets[p.name] = &p.value;
  for (auto& [name, m] : model.buffers()) targets[std::string(kBufferPrefix) + name] = m;

  const auto blocks = get<std::uint64_t>(in);
  if (blocks != targets.size()) {
    throw Error(ErrorCode::BadCheckpoint, "checkpoint has " + std::to_string(blocks) + " blocks, model expects " +
                                              std::to_string(targets.size()));
  }
  for (std::uint64_t b = 0; b < blocks; ++b) {
    const std::string name = get_string(in, get<std::uint32_t>(in));
    auto it = targets.find(name);
    if (it == targets.end()) throw Error(ErrorCode::BadCheckpoint, "unexpected block " + name);
    if (get<std::uint32_t>(in) != 2) throw Error(ErrorCode::BadCheckpoint, "block " + name + " is not rank 2");
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    DenseMatrix& target = *it->second;
    if (rows != target.rows() || cols != target.cols()) {
      throw Error(ErrorCode::BadCheckpoint, "block " + name + " has shape " + std::to_string(rows) + "x" +
                                                std::to_string(cols) + ", model expects " +
                                                std::to_string(target.rows()) + "x" + std::to_string(target.cols()));
    }
    for (double& x : target.data()) x = std::bit_cast<double>(get<std::uint64_t>(in));
    targets.erase(it);
  }
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot write " + path.string());
  write_checkpoint(out, model);
  if (!out) throw Error(ErrorCode::MissingFile, "write failed for " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace pan

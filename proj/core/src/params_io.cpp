#include "flowlik/params_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include <json.hpp>

#include "flowlik/errors.hpp"

namespace flowlik {

namespace {

constexpr std::array<char, 4> kMagic{'F', 'L', 'W', 'P'};

template <class U>
void put_le(std::ostream& out, U v) {
  std::array<char, sizeof(U)> b{};
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), b.size());
}

template <class U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> b{};
  in.read(reinterpret_cast<char*>(b.data()), b.size());
  if (!in) throw IoError("model file truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

nlohmann::json header_json(const ModelFile& m) {
  const MlpShape& s = m.params.shape();
  nlohmann::json layers = nlohmann::json::array();
  for (auto [in, out] : s.layers()) layers.push_back({in, out});
  return {
      {"format_version", kParamsFormatVersion},
      {"activation", std::string(to_string(s.activation))},
      {"data_dim", s.data_dim},
      {"hidden", s.hidden},
      {"time_embed_dim", s.time_embed_dim},
      {"cond_dim", s.cond_dim},
      {"num_classes", s.num_classes},
      {"layers", layers},
      {"param_count", m.params.values().size()},
      {"sde", std::string(to_string(m.sde.variant))},
      {"schedule",
       {{"kind", std::string(to_string(m.sde.schedule.kind))},
        {"beta0", m.sde.schedule.beta0},
        {"beta_T", m.sde.schedule.beta_T},
        {"T", m.sde.schedule.terminal_time}}},
  };
}

}  // namespace

void write_model(std::ostream& out, const ModelFile& model) {
  const std::string header = header_json(model).dump();
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kParamsFormatVersion);
  put_le<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  const std::size_t used = 16 + header.size();
  for (std::size_t i = used; i % 8 != 0; ++i) out.put('\0');
  for (Index i = 0; i < model.params.values().size(); ++i) {
    put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(model.params.values()[i]));
  }
  if (!out) throw IoError("failed writing model");
}

ModelFile read_model(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError("not a flowlik model file (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kParamsFormatVersion) throw IoError("unsupported model format version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(in);
  if (header_len > (1u << 24)) throw IoError("model header too large");
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw IoError("model file truncated");
  for (std::size_t i = 16 + header_len; i % 8 != 0; ++i) in.get();

  ModelFile m;
  try {
    const auto h = nlohmann::json::parse(header);
    MlpShape s;
    s.activation = parse_activation(h.at("activation").get<std::string>());
    s.data_dim = h.at("data_dim").get<int>();
    s.hidden = h.at("hidden").get<std::vector<int>>();
    s.time_embed_dim = h.at("time_embed_dim").get<int>();
    s.cond_dim = h.at("cond_dim").get<int>();
    s.num_classes = h.at("num_classes").get<int>();
    const auto count = h.at("param_count").get<Index>();
    if (count != s.param_count()) throw IoError("model header param_count does not match its layer shapes");
    Vector values(count);
    for (Index i = 0; i < count; ++i) values[i] = std::bit_cast<double>(get_le<std::uint64_t>(in));
    m.params = NetworkParams(s, std::move(values));
    m.sde.variant = parse_sde_variant(h.at("sde").get<std::string>());
    const auto& sch = h.at("schedule");
    m.sde.schedule.kind = parse_schedule_kind(sch.at("kind").get<std::string>());
    m.sde.schedule.beta0 = sch.at("beta0").get<double>();
    m.sde.schedule.beta_T = sch.at("beta_T").get<double>();
    m.sde.schedule.terminal_time = sch.at("T").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad model header: ") + e.what());
  }
  return m;
}

void save_model(const std::filesystem::path& path, const ModelFile& model) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_model(out, model);
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_model(in);
}

}  // namespace flowlik

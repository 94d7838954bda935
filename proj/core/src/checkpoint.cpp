#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "focuslab/error.hpp"
#include "focuslab/model.hpp"

namespace focuslab::model {

namespace {

constexpr std::array<char, 8> kMagic{'F', 'O', 'C', 'U', 'S', 'L', 'A', 'B'};
// Guards against allocating absurd sizes from a corrupt header.
constexpr std::uint32_t kMaxDim = 1u << 24;

template <class U>
void put_le(std::ostream& os, U v) {
  static_assert(std::is_trivially_copyable_v<U>);
  std::array<unsigned char, sizeof(U)> bytes;
  std::memcpy(bytes.data(), &v, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <class U>
U get_le(std::istream& is, const std::string& where) {
  std::array<unsigned char, sizeof(U)> bytes;
  if (!is.read(reinterpret_cast<char*>(bytes.data()), bytes.size()))
    throw FormatError(where + ": truncated checkpoint");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  U v;
  std::memcpy(&v, bytes.data(), sizeof(U));
  return v;
}

} // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  const auto layout = parameter_layout(params.config);
  if (layout.size() != params.tensors.size())
    throw InvalidArgument("save_checkpoint: parameter set does not match its configuration");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError(path.string() + ": cannot open for writing");

  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, kCheckpointVersion);
  const ModelConfig& c = params.config;
  put_le<std::int32_t>(os, c.width);
  put_le<std::int32_t>(os, c.height);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.encoder_channels.size()));
  for (int ch : c.encoder_channels) put_le<std::int32_t>(os, ch);
  put_le<std::int32_t>(os, c.categories);
  put_le<std::int32_t>(os, c.recurrent_width);
  put_le<double>(os, c.lambda_heatmap);

  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& t = params.tensors[i];
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(layout[i].name.size()));
    os.write(layout[i].name.data(), static_cast<std::streamsize>(layout[i].name.size()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rows()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index k = 0; k < t.size(); ++k) put_le<float>(os, t.data()[k]);
  }
  if (!os.flush()) throw FormatError(path.string() + ": write failed");
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  const std::string where = path.string();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(where + ": cannot open checkpoint");

  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw FormatError(where + ": not a focuslab checkpoint");
  const auto version = get_le<std::uint32_t>(is, where);
  if (version != kCheckpointVersion)
    throw FormatError(where + ": unsupported checkpoint version " + std::to_string(version));

  ModelConfig c;
  c.width = get_le<std::int32_t>(is, where);
  c.height = get_le<std::int32_t>(is, where);
  const auto blocks = get_le<std::uint32_t>(is, where);
  if (blocks == 0 || blocks > 16) throw FormatError(where + ": implausible encoder depth");
  c.encoder_channels.resize(blocks);
  for (auto& ch : c.encoder_channels) ch = get_le<std::int32_t>(is, where);
  c.categories = get_le<std::int32_t>(is, where);
  c.recurrent_width = get_le<std::int32_t>(is, where);
  c.lambda_heatmap = get_le<double>(is, where);
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(where + ": invalid configuration: " + e.what());
  }

  ModelParams params;
  params.config = c;
  for (const auto& info : parameter_layout(c)) {
    const auto len = get_le<std::uint32_t>(is, where);
    if (len > 256) throw FormatError(where + ": implausible tensor name length");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw FormatError(where + ": truncated checkpoint");
    if (name != info.name) throw FormatError(where + ": expected tensor '" + info.name + "', found '" + name + "'");
    const auto rows = get_le<std::uint32_t>(is, where);
    const auto cols = get_le<std::uint32_t>(is, where);
    if (rows > kMaxDim || cols > kMaxDim || static_cast<int>(rows) != info.rows || static_cast<int>(cols) != info.cols)
      throw FormatError(where + ": tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                        std::to_string(cols) + ", expected " + std::to_string(info.rows) + "x" +
                        std::to_string(info.cols));
    Matrix<float> t(rows, cols);
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = get_le<float>(is, where);
    params.tensors.push_back(std::move(t));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError(where + ": trailing bytes after last tensor");
  try {
    params.check_finite("checkpoint");
  } catch (const NumericError& e) {
    throw FormatError(where + ": " + e.what());
  }
  return params;
}

} // namespace focuslab::model

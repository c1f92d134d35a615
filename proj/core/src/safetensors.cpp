#include "teprompt/safetensors.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "teprompt/errors.hpp"

namespace teprompt {

static_assert(std::endian::native == std::endian::little, "safetensors I/O assumes a little-endian host");

namespace {

double half_to_double(std::uint16_t h) {
  const std::uint32_t sign = (h >> 15) & 1u;
  const std::uint32_t exp = (h >> 10) & 0x1fu;
  const std::uint32_t mant = h & 0x3ffu;
  double value;
  if (exp == 0) {
    value = std::ldexp(static_cast<double>(mant), -24);
  } else if (exp == 31) {
    value = mant == 0 ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
  } else {
    value = std::ldexp(static_cast<double>(mant | 0x400u), static_cast<int>(exp) - 25);
  }
  return sign ? -value : value;
}

double bf16_to_double(std::uint16_t h) {
  const std::uint32_t bits = static_cast<std::uint32_t>(h) << 16;
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

}  // namespace

Matrix NamedTensor::as_matrix() const {
  if (shape.size() == 1) {
    Matrix m(1, shape[0]);
    std::copy(data.begin(), data.end(), m.data());
    return m;
  }
  if (shape.size() == 2) {
    Matrix m(shape[0], shape[1]);
    std::copy(data.begin(), data.end(), m.data());
    return m;
  }
  throw DataError("only 1-D and 2-D tensors are supported");
}

void write_safetensors(const std::filesystem::path& path, const std::map<std::string, const Matrix*>& tensors,
                       TensorDtype dtype, const std::map<std::string, std::string>& metadata) {
  const std::size_t width = dtype == TensorDtype::F64 ? 8 : 4;
  nlohmann::ordered_json header;
  if (!metadata.empty()) header["__metadata__"] = metadata;
  std::size_t offset = 0;
  for (const auto& [name, m] : tensors) {
    const std::size_t bytes = static_cast<std::size_t>(m->size()) * width;
    std::vector<std::int64_t> shape;
    if (m->rows() == 1) {
      shape = {m->cols()};
    } else {
      shape = {m->rows(), m->cols()};
    }
    header[name] = {{"dtype", dtype == TensorDtype::F64 ? "F64" : "F32"},
                    {"shape", shape},
                    {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  std::string text = header.dump();
  while (text.size() % 8 != 0) text += ' ';
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, m] : tensors) {
    if (dtype == TensorDtype::F64) {
      out.write(reinterpret_cast<const char*>(m->data()), static_cast<std::streamsize>(m->size() * 8));
    } else {
      std::vector<float> tmp(m->data(), m->data() + m->size());
      out.write(reinterpret_cast<const char*>(tmp.data()), static_cast<std::streamsize>(tmp.size() * 4));
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

std::map<std::string, NamedTensor> read_safetensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1ull << 30)) throw DataError(path.string() + ": bad safetensors header length");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError(path.string() + ": truncated safetensors header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": invalid safetensors header: " + e.what());
  }
  std::vector<char> payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::map<std::string, NamedTensor> out;
  for (const auto& [name, entry] : header.items()) {
    if (name == "__metadata__") continue;
    NamedTensor t;
    t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
    const auto dtype = entry.at("dtype").get<std::string>();
    const auto offsets = entry.at("data_offsets").get<std::vector<std::size_t>>();
    std::size_t count = 1;
    for (auto s : t.shape) count *= static_cast<std::size_t>(s);
    std::size_t width = 0;
    if (dtype == "F64") width = 8;
    else if (dtype == "F32") width = 4;
    else if (dtype == "F16" || dtype == "BF16") width = 2;
    else throw DataError(path.string() + ": tensor " + name + " has unsupported dtype " + dtype);
    if (offsets.size() != 2 || offsets[1] < offsets[0] || offsets[1] > payload.size() ||
        offsets[1] - offsets[0] != count * width) {
      throw DataError(path.string() + ": tensor " + name + " has inconsistent data offsets");
    }
    const char* src = payload.data() + offsets[0];
    t.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (width == 8) {
        std::memcpy(&t.data[i], src + 8 * i, 8);
      } else if (width == 4) {
        float f;
        std::memcpy(&f, src + 4 * i, 4);
        t.data[i] = f;
      } else {
        std::uint16_t h;
        std::memcpy(&h, src + 2 * i, 2);
        t.data[i] = dtype == "F16" ? half_to_double(h) : bf16_to_double(h);
      }
    }
    out.emplace(name, std::move(t));
  }
  return out;
}

}  // namespace teprompt

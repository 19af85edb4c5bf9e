#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "fnn/datasets.hpp"

namespace fnn {

namespace {

constexpr char kMagic[4] = {'F', 'N', 'N', 'D'};
constexpr std::uint8_t kVersion = 1;

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(const std::string& buf, std::size_t& at) {
  if (at + 8 > buf.size()) throw format_error("truncated container");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(buf[at + i])) << (8 * i);
  at += 8;
  return v;
}

double get_f64(const std::string& buf, std::size_t& at) {
  return std::bit_cast<double>(get_u64(buf, at));
}

void put_string(std::string& buf, const std::string& s) {
  put_u64(buf, s.size());
  buf.append(s);
}

std::string get_string(const std::string& buf, std::size_t& at) {
  const std::uint64_t n = get_u64(buf, at);
  if (at + n > buf.size()) throw format_error("truncated container");
  std::string s = buf.substr(at, n);
  at += n;
  return s;
}

}  // namespace

void save_container(const std::string& path, const std::string& manifest_json,
                    const std::vector<StoredSample>& samples) {
  std::string buf(kMagic, 4);
  buf.push_back(static_cast<char>(kVersion));
  put_string(buf, manifest_json);
  put_u64(buf, samples.size());
  for (const auto& sample : samples) {
    // dims ride inside the metadata object; inject/overwrite them so the
    // record is always self-describing
    nlohmann::json meta;
    try {
      meta = sample.metadata_json.empty() ? nlohmann::json::object()
                                          : nlohmann::json::parse(sample.metadata_json);
    } catch (const nlohmann::json::exception&) {
      throw format_error("sample metadata is not valid json");
    }
    if (!meta.is_object()) throw format_error("sample metadata must be a json object");
    meta["rows"] = sample.matrix.rows();
    meta["cols"] = sample.matrix.cols();
    put_string(buf, meta.dump());
    for (Eigen::Index i = 0; i < sample.matrix.rows(); ++i)
      for (Eigen::Index j = 0; j < sample.matrix.cols(); ++j) {
        put_f64(buf, sample.matrix(i, j).real());
        put_f64(buf, sample.matrix(i, j).imag());
      }
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw format_error("cannot write " + tmp);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw format_error("short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw format_error("cannot move into " + path);
}

LoadedContainer load_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open " + path);
  std::string buf{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (buf.size() < 5 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw format_error("not a sample container");
  if (static_cast<std::uint8_t>(buf[4]) != kVersion)
    throw format_error("unsupported container version");
  std::size_t at = 5;
  LoadedContainer out;
  out.manifest_json = get_string(buf, at);
  const std::uint64_t count = get_u64(buf, at);
  if (count > (1u << 24)) throw format_error("implausible sample count");
  out.samples.resize(count);
  for (std::uint64_t s = 0; s < count; ++s) {
    StoredSample& sample = out.samples[s];
    sample.metadata_json = get_string(buf, at);
    Eigen::Index rows = 0, cols = 0;
    try {
      const auto meta = nlohmann::json::parse(sample.metadata_json);
      rows = meta.at("rows").get<Eigen::Index>();
      cols = meta.at("cols").get<Eigen::Index>();
    } catch (const nlohmann::json::exception&) {
      throw format_error("sample metadata lacks usable dims");
    }
    if (rows < 0 || cols < 0 || rows * cols > (1 << 26))
      throw format_error("implausible sample dims");
    sample.matrix.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) {
        const double re = get_f64(buf, at);
        const double im = get_f64(buf, at);
        sample.matrix(i, j) = cxd(re, im);
      }
  }
  if (at != buf.size()) throw format_error("trailing bytes in container");
  return out;
}

}  // namespace fnn

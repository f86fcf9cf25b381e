// SPDX-License-Identifier: Apache-2.0
#include "gencomp/checkpoint.h"

#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <vector>

#include "gencomp/error.h"
#include "json.hpp"

namespace gencomp {
namespace {

constexpr char kMagic[4] = {'G', 'C', 'M', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void Bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void U32(std::uint32_t v) { Bytes(&v, 4); }
  void String(const std::string& s) {
    U32(static_cast<std::uint32_t>(s.size()));
    Bytes(s.data(), s.size());
  }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(std::vector<char> buf, std::string path) : buf_(std::move(buf)), path_(std::move(path)) {}
  void Bytes(void* p, std::size_t n) {
    if (pos_ + n > buf_.size()) throw IoError(path_, "truncated checkpoint");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t U32() {
    std::uint32_t v;
    Bytes(&v, 4);
    return v;
  }
  std::string String() {
    const std::uint32_t n = U32();
    if (n > buf_.size() - pos_) throw IoError(path_, "truncated checkpoint");
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  std::vector<char> buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void SaveCheckpoint(const DiT<float>& model, const CheckpointMeta& meta,
                    const std::filesystem::path& path) {
  nlohmann::json header;
  header["model"] = nlohmann::json::parse(model.config().ToJson());
  header["seed"] = meta.seed;
  header["step"] = meta.step;
  header["schedule"] = ScheduleKindName(meta.schedule);

  Writer w;
  w.Bytes(kMagic, 4);
  w.U32(kVersion);
  w.String(header.dump());
  w.U32(static_cast<std::uint32_t>(model.params().size()));
  for (const auto& p : model.params()) {
    const auto& v = p.var->value;
    w.String(p.name);
    w.U32(static_cast<std::uint32_t>(v.rows()));
    w.U32(static_cast<std::uint32_t>(v.cols()));
    w.Bytes(v.data(), static_cast<std::size_t>(v.size()) * sizeof(float));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw IoError(path.string(), "write failed");
}

LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open checkpoint");
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}), path.string());

  char magic[4];
  r.Bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw IoError(path.string(), "not a GCMP checkpoint");
  if (r.U32() != kVersion) throw IoError(path.string(), "unsupported checkpoint version");

  LoadedCheckpoint out;
  ModelConfig config;
  try {
    const auto header = nlohmann::json::parse(r.String());
    config = ModelConfig::FromJson(header.at("model").dump());
    out.meta.seed = header.at("seed").get<std::uint64_t>();
    out.meta.step = header.at("step").get<std::int64_t>();
    out.meta.schedule = ParseScheduleKind(header.value("schedule", std::string("linear")));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string(), std::string("bad checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw IoError(path.string(), std::string("bad checkpoint config: ") + e.what());
  }
  out.model = std::make_unique<DiT<float>>(config, out.meta.seed);

  std::map<std::string, ag::Var<float>> by_name;
  for (const auto& p : out.model->params()) by_name[p.name] = p.var;
  const std::uint32_t count = r.U32();
  if (count != by_name.size()) throw IoError(path.string(), "parameter count does not match config");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.String();
    const std::uint32_t rows = r.U32();
    const std::uint32_t cols = r.U32();
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw IoError(path.string(), "unknown or repeated parameter '" + name + "'");
    }
    auto& v = it->second->value;
    if (v.rows() != rows || v.cols() != cols) {
      throw IoError(path.string(), "shape mismatch for parameter '" + name + "'");
    }
    r.Bytes(v.data(), static_cast<std::size_t>(v.size()) * sizeof(float));
    by_name.erase(it);
  }
  if (!r.done()) throw IoError(path.string(), "trailing bytes after parameters");
  return out;
}

}  // namespace gencomp

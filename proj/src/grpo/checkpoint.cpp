#include "ropd/grpo/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "ropd/error.hpp"
#include "ropd/util/fs.hpp"

namespace ropd::grpo {

namespace {

constexpr char kMagic[8] = {'R', 'O', 'P', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_bytes(std::string& out, const void* data, std::size_t size) {
  out.append(static_cast<const char*>(data), size);
}

void put_string(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out.append(s);
}

void put_vector(std::string& out, const Eigen::VectorXd& v) {
  put_u64(out, static_cast<std::uint64_t>(v.size()));
  put_bytes(out, v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
}

void put_policy(std::string& out, const ToyPolicy& p) {
  put_u32(out, static_cast<std::uint32_t>(p.vocab_size()));
  put_u32(out, static_cast<std::uint32_t>(p.context_order()));
  put_bytes(out, p.logits().data(),
            static_cast<std::size_t>(p.logits().size()) * sizeof(double));
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
      v = (v << 8) | static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)]);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
      v = (v << 8) | static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)]);
    pos_ += 8;
    return v;
  }

  void bytes(void* dst, std::size_t size) {
    need(size);
    std::memcpy(dst, data_.data() + pos_, size);
    pos_ += size;
  }

  std::string str() {
    const std::uint64_t size = u64();
    need(size);
    std::string s = data_.substr(pos_, size);
    pos_ += size;
    return s;
  }

  Eigen::VectorXd vector() {
    const auto size = static_cast<Eigen::Index>(u64());
    Eigen::VectorXd v(size);
    bytes(v.data(), static_cast<std::size_t>(size) * sizeof(double));
    return v;
  }

  ToyPolicy policy() {
    const int vocab = static_cast<int>(u32());
    const int order = static_cast<int>(u32());
    ToyPolicy p(vocab, order);
    bytes(p.logits().data(),
          static_cast<std::size_t>(p.logits().size()) * sizeof(double));
    return p;
  }

 private:
  void need(std::size_t size) {
    if (pos_ + size > data_.size()) {
      throw Error(ErrorKind::CorruptEntry, "checkpoint truncated");
    }
  }

  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u64(out, ckpt.step);
  put_u64(out, ckpt.rng_state);
  put_policy(out, ckpt.policy);
  put_policy(out, ckpt.ref_policy);
  put_vector(out, ckpt.optimizer.m);
  put_vector(out, ckpt.optimizer.v);
  put_u64(out, static_cast<std::uint64_t>(ckpt.optimizer.step));
  put_string(out, ckpt.config_hash);
  put_string(out, ckpt.metadata_json);
  util::atomic_write_file(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::string data = util::read_file(path);
  if (data.size() < sizeof(kMagic) ||
      std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorKind::CorruptEntry, "not a checkpoint file: " + path.string());
  }
  Reader reader(data.substr(sizeof(kMagic)));
  const std::uint32_t version = reader.u32();
  if (version != kVersion) {
    throw Error(ErrorKind::CorruptEntry,
                "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.step = reader.u64();
  ckpt.rng_state = reader.u64();
  ckpt.policy = reader.policy();
  ckpt.ref_policy = reader.policy();
  ckpt.optimizer.m = reader.vector();
  ckpt.optimizer.v = reader.vector();
  ckpt.optimizer.step = static_cast<int>(reader.u64());
  ckpt.config_hash = reader.str();
  ckpt.metadata_json = reader.str();
  return ckpt;
}

}  // namespace ropd::grpo

#include "kpff/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace kpff {

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool done() const noexcept { return pos_ == bytes_.size(); }

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    need(sizeof(U));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return std::bit_cast<T>(bits);
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> records) {
  std::vector<std::uint8_t> out{'K', 'P', 'F', 'F'};
  put_le(out, kCheckpointVersion);
  for (const auto& rec : records) {
    put_le(out, static_cast<std::uint32_t>(rec.name.size()));
    out.insert(out.end(), rec.name.begin(), rec.name.end());
    put_le(out, static_cast<std::uint32_t>(rec.value.rank()));
    for (std::size_t e : rec.value.shape()) put_le(out, static_cast<std::uint32_t>(e));
    for (double v : rec.value.values()) put_le(out, v);
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  if (in.get_string(4) != "KPFF") throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  std::vector<NamedTensor> records;
  while (!in.done()) {
    NamedTensor rec;
    rec.name = in.get_string(in.get<std::uint32_t>());
    const auto rank = in.get<std::uint32_t>();
    if (rank < 1 || rank > 4) throw CheckpointError("record '" + rec.name + "' has invalid rank");
    Shape shape(rank);
    for (auto& e : shape) e = in.get<std::uint32_t>();
    std::vector<double> data(checked_element_count(shape));
    for (auto& v : data) v = in.get<double>();
    rec.value = Tensor(std::move(shape), std::move(data));
    records.push_back(std::move(rec));
  }
  return records;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const ParamRef> params) {
  std::vector<NamedTensor> records;
  records.reserve(params.size());
  for (const auto& p : params) records.push_back({p.name, *p.value});
  const auto bytes = encode_checkpoint(records);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void restore_parameters(std::span<const NamedTensor> records, std::span<const ParamRef> params) {
  for (const auto& p : params) {
    const NamedTensor* match = nullptr;
    for (const auto& rec : records) {
      if (rec.name == p.name) match = &rec;
    }
    if (!match) throw CheckpointError("checkpoint has no parameter '" + p.name + "'");
    require_shape(match->value, p.value->shape(), "checkpoint parameter " + p.name);
    *p.value = match->value;
  }
}

}  // namespace kpff

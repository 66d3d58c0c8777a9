#include "monofill/diffnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "monofill/errors.hpp"

namespace monofill::diffnet {

namespace {

constexpr char kMagic[8] = {'M', 'F', 'C', 'K', 'P', 'T', '\0', '\0'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const char*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <typename U>
  void le(U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(std::vector<char> data, std::string path) : data_(std::move(data)), path_(std::move(path)) {}
  const char* take(std::size_t n) {
    if (pos_ + n > data_.size()) throw IoError(path_, "truncated checkpoint");
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  template <typename U>
  U le() {
    const auto* p = reinterpret_cast<const unsigned char*>(take(sizeof(U)));
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(p[i]) << (8 * i);
    return value;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::vector<char> data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

template <typename Scalar>
void save_checkpoint(const NetworkParams<Scalar>& params, const std::string& path) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.le<std::uint32_t>(kCheckpointVersion);
  w.le<std::uint32_t>(sizeof(Scalar));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(params.entries.size()));
  for (const auto& e : params.entries) {
    w.le<std::uint32_t>(static_cast<std::uint32_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.le<std::uint8_t>(e.trainable ? 1 : 0);
    const Shape& s = e.value.shape();
    for (Index d : {s.n, s.c, s.h, s.w}) w.le<std::uint64_t>(static_cast<std::uint64_t>(d));
    for (Index j = 0; j < e.value.size(); ++j) {
      if constexpr (sizeof(Scalar) == 4)
        w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(e.value.data()[j]));
      else
        w.le<std::uint64_t>(std::bit_cast<std::uint64_t>(e.value.data()[j]));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw IoError(path, "write failed");
}

template <typename Scalar>
NetworkParams<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open checkpoint");
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}), path);
  if (std::memcmp(r.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0) throw IoError(path, "not a checkpoint file");
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion) throw IoError(path, "unsupported checkpoint version " + std::to_string(version));
  const auto width = r.le<std::uint32_t>();
  if (width != 4 && width != 8) throw IoError(path, "unsupported scalar width " + std::to_string(width));
  const auto count = r.le<std::uint32_t>();

  NetworkParams<Scalar> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    ParamTensor<Scalar> e;
    const auto len = r.le<std::uint32_t>();
    e.name.assign(r.take(len), len);
    e.trainable = r.le<std::uint8_t>() != 0;
    Shape s;
    s.n = static_cast<Index>(r.le<std::uint64_t>());
    s.c = static_cast<Index>(r.le<std::uint64_t>());
    s.h = static_cast<Index>(r.le<std::uint64_t>());
    s.w = static_cast<Index>(r.le<std::uint64_t>());
    e.value = Tensor<Scalar>(s);
    for (Index j = 0; j < s.size(); ++j) {
      const double v = width == 4 ? static_cast<double>(std::bit_cast<float>(r.le<std::uint32_t>()))
                                  : std::bit_cast<double>(r.le<std::uint64_t>());
      e.value.data()[j] = static_cast<Scalar>(v);
    }
    params.entries.push_back(std::move(e));
  }
  if (!r.done()) throw IoError(path, "trailing bytes after last entry");
  return params;
}

template void save_checkpoint<float>(const NetworkParams<float>&, const std::string&);
template void save_checkpoint<double>(const NetworkParams<double>&, const std::string&);
template NetworkParams<float> load_checkpoint<float>(const std::string&);
template NetworkParams<double> load_checkpoint<double>(const std::string&);

}  // namespace monofill::diffnet

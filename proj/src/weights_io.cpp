#include "e3g/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace e3g {

namespace {

constexpr char kMagic[4] = {'E', '3', 'G', 'W'};

class Writer {
public:
    void bytes(const void* p, std::size_t n)
    {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <typename U>
    void le(U v)
    {
        for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}

    template <typename U>
    U le()
    {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(in_[pos_ + i]) << (8 * i);
        pos_ += sizeof(U);
        return v;
    }
    void bytes(void* p, std::size_t n)
    {
        need(n);
        std::memcpy(p, in_.data() + pos_, n);
        pos_ += n;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::size_t n) const
    {
        if (in_.size() - pos_ < n) throw WeightFormatError("weight file truncated at byte " + std::to_string(pos_));
    }

    const std::vector<std::uint8_t>& in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_weights(const ParameterSet& params)
{
    Writer w;
    w.bytes(kMagic, 4);
    w.le<std::uint32_t>(kWeightFormatVersion);
    w.le<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, t] : params) {
        if (name.size() > 0xFFFF) throw WeightFormatError("parameter name too long: " + name);
        w.le<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.le<std::uint8_t>(static_cast<std::uint8_t>(t.rank()));
        for (auto d : t.shape().dims()) w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
        for (float v : t.data()) w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(v));
    }
    return w.take();
}

ParameterSet decode_weights(const std::vector<std::uint8_t>& bytes)
{
    Reader r(bytes);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw WeightFormatError("bad magic: not an E3GW weight file");
    const auto version = r.le<std::uint32_t>();
    if (version != kWeightFormatVersion)
        throw WeightFormatError("unsupported E3GW version " + std::to_string(version));
    const auto count = r.le<std::uint32_t>();
    ParameterSet params;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name(r.le<std::uint16_t>(), '\0');
        r.bytes(name.data(), name.size());
        const auto rank = r.le<std::uint8_t>();
        if (rank == 0 || rank > 4) throw WeightFormatError("tensor " + name + " has invalid rank " + std::to_string(rank));
        std::vector<std::size_t> dims(rank);
        for (auto& d : dims) {
            d = r.le<std::uint32_t>();
            if (d == 0) throw WeightFormatError("tensor " + name + " has a zero extent");
        }
        Shape shape(dims);
        std::vector<float> data(shape.numel());
        for (auto& v : data) v = std::bit_cast<float>(r.le<std::uint32_t>());
        if (!params.emplace(name, Tensor(shape, std::move(data))).second)
            throw WeightFormatError("duplicate tensor name " + name);
    }
    if (!r.done()) throw WeightFormatError("trailing bytes after last tensor");
    return params;
}

void save_weights(const std::filesystem::path& path, const ParameterSet& params)
{
    const auto bytes = encode_weights(params);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("failed writing " + path.string());
}

ParameterSet load_weights(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_weights(bytes);
}

}  // namespace e3g

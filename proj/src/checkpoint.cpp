#include "updd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "updd/errors.hpp"

namespace updd {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'U', 'P', 'D', 'D', 'C', 'K', 'P', 'T'};

template <typename T>
void write_pod(std::vector<uint8_t>& out, T value) {
    const auto* p = reinterpret_cast<const uint8_t*>(&value);
    out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
   public:
    explicit Reader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T pod() {
        T value;
        std::memcpy(&value, take(sizeof(T)).data(), sizeof(T));
        return value;
    }

    std::span<const uint8_t> take(size_t n) {
        if (pos_ + n > bytes_.size()) throw DataError("truncated container");
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

   private:
    std::span<const uint8_t> bytes_;
    size_t pos_ = 0;
};

size_t dtype_size(DType d) { return d == DType::F32 ? 4 : 8; }

template <typename T>
NamedArray make_array(DType dtype, Shape shape, std::span<const T> values) {
    if (shape_numel(shape) != static_cast<int64_t>(values.size()))
        throw ShapeError("array shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) +
                         " values");
    NamedArray a;
    a.dtype = dtype;
    a.shape = std::move(shape);
    a.payload.resize(values.size() * sizeof(T));
    if (!values.empty()) std::memcpy(a.payload.data(), values.data(), a.payload.size());
    return a;
}

template <typename T>
std::vector<T> read_array(const NamedArray& a, DType want, const std::string& name) {
    if (a.dtype != want)
        throw DataError("array '" + name + "' has dtype " + std::string(dtype_name(a.dtype)) + ", expected " +
                        std::string(dtype_name(want)));
    std::vector<T> out(a.payload.size() / sizeof(T));
    if (!out.empty()) std::memcpy(out.data(), a.payload.data(), a.payload.size());
    return out;
}

}  // namespace

std::string_view dtype_name(DType dtype) {
    switch (dtype) {
        case DType::F32: return "f32";
        case DType::F64: return "f64";
        case DType::I64: return "i64";
    }
    return "?";
}

void Container::put_f32(const std::string& name, Shape shape, std::span<const float> values) {
    arrays_[name] = make_array(DType::F32, std::move(shape), values);
}

void Container::put_f64(const std::string& name, Shape shape, std::span<const double> values) {
    arrays_[name] = make_array(DType::F64, std::move(shape), values);
}

void Container::put_i64(const std::string& name, Shape shape, std::span<const int64_t> values) {
    arrays_[name] = make_array(DType::I64, std::move(shape), values);
}

void Container::put_tensor(const std::string& name, const Tensor& tensor) {
    const DType dtype = std::is_same_v<Scalar, float> ? DType::F32 : DType::F64;
    arrays_[name] = make_array(dtype, tensor.shape(), tensor.data());
}

const NamedArray& Container::array(const std::string& name) const {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw DataError("container has no array '" + name + "'");
    return it->second;
}

std::vector<float> Container::get_f32(const std::string& name) const {
    return read_array<float>(array(name), DType::F32, name);
}

std::vector<double> Container::get_f64(const std::string& name) const {
    return read_array<double>(array(name), DType::F64, name);
}

std::vector<int64_t> Container::get_i64(const std::string& name) const {
    return read_array<int64_t>(array(name), DType::I64, name);
}

Tensor Container::get_tensor(const std::string& name) const {
    const auto& a = array(name);
    std::vector<Scalar> values;
    if (a.dtype == DType::F32) {
        auto v = get_f32(name);
        values.assign(v.begin(), v.end());
    } else if (a.dtype == DType::F64) {
        auto v = get_f64(name);
        values.assign(v.begin(), v.end());
    } else {
        throw DataError("array '" + name + "' is not floating point");
    }
    return Tensor::from(a.shape, std::move(values));
}

std::vector<std::string> Container::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : arrays_) out.push_back(name);
    return out;
}

std::vector<uint8_t> Container::serialize() const {
    std::vector<uint8_t> out(kMagic, kMagic + 8);
    write_pod<uint32_t>(out, kFormatVersion);
    const std::string header = metadata_.dump();
    write_pod<uint64_t>(out, header.size());
    out.insert(out.end(), header.begin(), header.end());
    write_pod<uint64_t>(out, arrays_.size());
    for (const auto& [name, a] : arrays_) {
        write_pod<uint32_t>(out, static_cast<uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        write_pod<uint8_t>(out, static_cast<uint8_t>(a.dtype));
        write_pod<uint32_t>(out, static_cast<uint32_t>(a.shape.size()));
        for (int64_t d : a.shape) write_pod<uint64_t>(out, static_cast<uint64_t>(d));
        write_pod<uint64_t>(out, a.payload.size());
        out.insert(out.end(), a.payload.begin(), a.payload.end());
    }
    return out;
}

Container Container::deserialize(std::span<const uint8_t> bytes) {
    Reader in(bytes);
    auto magic = in.take(8);
    if (std::memcmp(magic.data(), kMagic, 8) != 0) throw DataError("not a checkpoint container (bad magic)");
    const auto version = in.pod<uint32_t>();
    if (version != kFormatVersion) throw DataError("unsupported container version " + std::to_string(version));
    Container c;
    const auto header_len = in.pod<uint64_t>();
    auto header = in.take(header_len);
    try {
        c.metadata_ = nlohmann::json::parse(header.begin(), header.end());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad container header: ") + e.what());
    }
    const auto count = in.pod<uint64_t>();
    for (uint64_t i = 0; i < count; ++i) {
        const auto name_len = in.pod<uint32_t>();
        auto name_bytes = in.take(name_len);
        std::string name(name_bytes.begin(), name_bytes.end());
        NamedArray a;
        const auto tag = in.pod<uint8_t>();
        if (tag > static_cast<uint8_t>(DType::I64)) throw DataError("unknown dtype tag in '" + name + "'");
        a.dtype = static_cast<DType>(tag);
        const auto rank = in.pod<uint32_t>();
        for (uint32_t r = 0; r < rank; ++r) a.shape.push_back(static_cast<int64_t>(in.pod<uint64_t>()));
        const auto len = in.pod<uint64_t>();
        if (len != static_cast<uint64_t>(shape_numel(a.shape)) * dtype_size(a.dtype))
            throw DataError("payload size mismatch for '" + name + "'");
        auto payload = in.take(len);
        a.payload.assign(payload.begin(), payload.end());
        c.arrays_.emplace(std::move(name), std::move(a));
    }
    if (!in.done()) throw DataError("trailing bytes after container");
    return c;
}

void Container::save(const std::filesystem::path& path) const {
    const auto bytes = serialize();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + path.string());
}

namespace {

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

Container Container::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

std::string file_hash(const std::filesystem::path& path) {
    uint64_t h = 1469598103934665603ull;
    for (uint8_t b : read_file(path)) {
        h ^= b;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

}  // namespace updd

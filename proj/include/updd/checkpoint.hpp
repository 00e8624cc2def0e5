#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "updd/tensor.hpp"

namespace updd {

enum class DType : uint8_t { F32 = 0, F64 = 1, I64 = 2 };

std::string_view dtype_name(DType dtype);

struct NamedArray {
    DType dtype = DType::F32;
    Shape shape;
    std::vector<uint8_t> payload;  // little-endian
};

// Self-describing container: a JSON metadata header followed by named arrays.
//
// Byte layout (all integers little-endian):
//   "UPDDCKPT"  u32 version  u64 header_len  header (UTF-8 JSON)
//   u64 array_count, then per array in name order:
//   u32 name_len  name  u8 dtype  u32 rank  u64 dims[rank]  u64 payload_len  payload
class Container {
   public:
    static constexpr uint32_t kFormatVersion = 1;

    nlohmann::json& metadata() { return metadata_; }
    const nlohmann::json& metadata() const { return metadata_; }

    void put_f32(const std::string& name, Shape shape, std::span<const float> values);
    void put_f64(const std::string& name, Shape shape, std::span<const double> values);
    void put_i64(const std::string& name, Shape shape, std::span<const int64_t> values);
    void put_tensor(const std::string& name, const Tensor& tensor);

    bool has(const std::string& name) const { return arrays_.count(name) != 0; }
    const NamedArray& array(const std::string& name) const;
    std::vector<float> get_f32(const std::string& name) const;
    std::vector<double> get_f64(const std::string& name) const;
    std::vector<int64_t> get_i64(const std::string& name) const;
    // Accepts either float width and converts to Scalar.
    Tensor get_tensor(const std::string& name) const;
    std::vector<std::string> names() const;

    std::vector<uint8_t> serialize() const;
    static Container deserialize(std::span<const uint8_t> bytes);

    void save(const std::filesystem::path& path) const;
    static Container load(const std::filesystem::path& path);

   private:
    nlohmann::json metadata_ = nlohmann::json::object();
    std::map<std::string, NamedArray> arrays_;
};

// FNV-1a 64 over the bytes of a file, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

}  // namespace updd

#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace asd::data {

enum class Split { kTrain, kTest };
enum class Condition { kNormal, kAnomaly };

std::string_view to_string(Split s);
std::string_view to_string(Condition c);

struct MachineKey {
    std::string type;
    int id = 0;

    auto operator<=>(const MachineKey&) const = default;
};

std::string to_string(const MachineKey& key);

// Bijection (machine_type, machine_id) -> [0, K), ordered by key.
class ClassMap {
public:
    ClassMap() = default;
    // Deduplicates and sorts the keys.
    explicit ClassMap(std::vector<MachineKey> keys);

    std::size_t size() const noexcept { return keys_.size(); }
    const std::vector<MachineKey>& keys() const noexcept { return keys_; }
    bool contains(const MachineKey& key) const;
    // Throws ClassMapError for unseen keys.
    std::size_t index_of(const MachineKey& key) const;
    const MachineKey& key_at(std::size_t index) const { return keys_.at(index); }

    friend bool operator==(const ClassMap&, const ClassMap&) = default;

private:
    std::vector<MachineKey> keys_;
};

void to_json(nlohmann::json& j, const ClassMap& m);
void from_json(const nlohmann::json& j, ClassMap& m);

struct ClipRecord {
    std::filesystem::path path;  // as written in the manifest
    MachineKey machine;
    Split split = Split::kTrain;
    Condition condition = Condition::kNormal;
    std::size_t line = 0;
};

struct Manifest {
    std::vector<ClipRecord> records;
    ClassMap class_map;
    std::filesystem::path base_dir;  // relative record paths resolve against this

    std::filesystem::path resolve(const ClipRecord& r) const;
    std::vector<std::size_t> indices(Split split) const;
};

inline constexpr std::string_view kManifestHeader = "path,machine_type,machine_id,split,condition";

// Parses the CSV manifest. Errors carry the offending line number.
Manifest parse_manifest(const std::filesystem::path& path);
Manifest parse_manifest_text(std::string_view text, std::filesystem::path base_dir = {});

void write_manifest(const std::filesystem::path& path, const std::vector<ClipRecord>& records);

}  // namespace asd::data

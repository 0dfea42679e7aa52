#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "clnet/nn.hpp"
#include "clnet/tensor.hpp"

namespace clnet {

// Binary weight snapshot. Layout (little-endian):
//   "CLNT" | u32 version | u64 config_hash | u32 count |
//   count * ( u32 name_len | name | u32 ndim | i32 dims[ndim] | f64 data[] )
// Entries keep insertion order, so identical weights serialize to identical
// bytes and a file hash doubles as a reproducibility check.
struct Checkpoint {
    uint64_t config_hash = 0;
    std::vector<std::pair<std::string, Tensor>> entries;

    void put(const std::string& name, const Tensor& t);
    const Tensor* find(const std::string& name) const;
};

// Snapshot every named tensor (params and buffers alike).
Checkpoint capture(const NamedTensors& named, uint64_t config_hash);

// Strict restore: every name must match in both directions and shapes must
// agree exactly; anything else is an ingestion error.
void restore_into(const Checkpoint& ck, const NamedTensors& named);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

} // namespace clnet

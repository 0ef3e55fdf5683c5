#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "selfact/encoder.hpp"
#include "selfact/reduction.hpp"

// Versioned text container for named parameter tensors. Layout:
//
//   selfact-params v1
//   meta <key> <value>            zero or more, sorted by key; value runs to
//                                 end of line and may contain spaces
//   labels <n>                    optional; followed by n verbatim label lines
//   tensor <name> <rank> <d0...>  one per tensor, followed by one line of
//                                 space-separated values (%.17g, row-major)
//   end
//
// %.17g round-trips doubles exactly, so save -> load -> save is the identity
// on the serialized text. Loading validates counts and rejects unknown
// directives; the typed wrappers additionally reject architecture mismatches.

namespace selfact {

struct ParamContainer {
    struct Tensor {
        std::string name;
        std::vector<std::size_t> dims;
        std::vector<double> values;
    };

    std::map<std::string, std::string> meta;
    std::vector<std::string> labels;
    std::vector<Tensor> tensors;  // serialized in this order

    // nullptr when absent.
    const Tensor* find(const std::string& name) const;
};

std::string container_to_string(const ParamContainer& c);
// Throws DataError on malformed input, with the offending line number.
ParamContainer container_from_string(const std::string& text);

// File variants; save throws DataError when the path is unwritable.
void save_container(const ParamContainer& c, const std::string& path);
ParamContainer load_container(const std::string& path);

// FNV-1a of the serialized text; a stable fingerprint for determinism checks.
std::uint64_t container_hash(const ParamContainer& c);

// ============================================================================
// Typed wrappers
// ============================================================================

ParamContainer to_container(const EncoderModel& model);
// Populates an existing model; throws DataError when any tensor's size does
// not match the model's architecture or the container kind is wrong.
void encoder_from_container(const ParamContainer& c, EncoderModel& model);

ParamContainer to_container(const ReducerModel& model);
ReducerModel reducer_from_container(const ParamContainer& c);

}  // namespace selfact

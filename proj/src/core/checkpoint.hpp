#pragma once

#include "core/tensor.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace mmgan {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Self-describing container: a JSON metadata block plus named double arrays.
struct Checkpoint {
    nlohmann::json meta;
    std::vector<std::pair<std::string, Tensor>> arrays;

    void add(const std::string& name, const Tensor& t) { arrays.emplace_back(name, t); }
    const Tensor* find(const std::string& name) const {
        for (const auto& [n, t] : arrays)
            if (n == name) return &t;
        return nullptr;
    }
    const Tensor& require(const std::string& name) const {
        const Tensor* t = find(name);
        if (!t) throw CheckpointError("checkpoint: missing array '" + name + "'");
        return *t;
    }

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

} // namespace mmgan

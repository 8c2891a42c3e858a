#pragma once

#include <algorithm>
#include <exception>
#include <string>
#include <vector>

#include "json.hpp"

#include "hiclr/error.hpp"

namespace hiclr {

// Reads known keys into a defaulted object and rejects anything else so a
// typo in a config file does not silently fall back to a default.
class Reader {
public:
    Reader(const nlohmann::json& j, std::string scope) : j_(j), scope_(std::move(scope)) {
        require(j_.is_object(), ErrorKind::config, scope_ + " must be a mapping");
    }
    ~Reader() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
                fail(ErrorKind::config, "unknown key '" + it.key() + "' in " + scope_);
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.push_back(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            fail(ErrorKind::config, scope_ + "." + key + " has the wrong type");
        }
    }
    const nlohmann::json* child(const char* key) {
        seen_.push_back(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

private:
    const nlohmann::json& j_;
    std::string scope_;
    std::vector<std::string> seen_;
};

}  // namespace hiclr

#include "geppml/country.hpp"

#include <algorithm>

#include "geppml/error.hpp"

namespace geppml {

bool CountryCode::valid(std::string_view code) noexcept {
    return code.size() == 3 &&
           std::all_of(code.begin(), code.end(), [](char c) { return c >= 'A' && c <= 'Z'; });
}

CountryCode::CountryCode(std::string_view code) {
    if (!valid(code)) {
        throw InputError("invalid country code '" + std::string(code) + "' (expected 3 letters A-Z)");
    }
    std::copy(code.begin(), code.end(), chars_.begin());
}

CountryRegistry::CountryRegistry(std::vector<CountryCode> codes) : codes_(std::move(codes)) {
    std::sort(codes_.begin(), codes_.end());
    auto dup = std::adjacent_find(codes_.begin(), codes_.end());
    if (dup != codes_.end()) {
        throw InputError("duplicate country code " + dup->str() + " in registry");
    }
}

std::optional<std::size_t> CountryRegistry::find(const CountryCode& code) const {
    auto it = std::lower_bound(codes_.begin(), codes_.end(), code);
    if (it == codes_.end() || *it != code) return std::nullopt;
    return static_cast<std::size_t>(it - codes_.begin());
}

std::optional<std::size_t> CountryRegistry::find(std::string_view code) const {
    if (!CountryCode::valid(code)) return std::nullopt;
    return find(CountryCode(code));
}

std::size_t CountryRegistry::index_of(const CountryCode& code) const {
    auto idx = find(code);
    if (!idx) throw InputError("unknown country code " + code.str());
    return *idx;
}

std::size_t CountryRegistry::index_of(std::string_view code) const {
    return index_of(CountryCode(code));
}

}  // namespace geppml

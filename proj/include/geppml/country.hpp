#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace geppml {

/// Three-letter uppercase country identifier (CHL, USA, DEU, ...).
class CountryCode {
public:
    CountryCode() = default;
    /// Throws InputError unless `code` is exactly three characters A-Z.
    explicit CountryCode(std::string_view code);

    static bool valid(std::string_view code) noexcept;

    std::string str() const { return {chars_.begin(), chars_.end()}; }
    std::string_view view() const noexcept { return {chars_.data(), chars_.size()}; }

    auto operator<=>(const CountryCode&) const = default;

private:
    std::array<char, 3> chars_{'A', 'A', 'A'};
};

/// Ordered, duplicate-free set of countries. Index order is lexicographic so
/// that any two registries built from the same codes agree on indices.
class CountryRegistry {
public:
    CountryRegistry() = default;
    /// Sorts and validates; throws InputError on duplicates.
    explicit CountryRegistry(std::vector<CountryCode> codes);

    std::size_t size() const noexcept { return codes_.size(); }
    bool empty() const noexcept { return codes_.empty(); }
    const CountryCode& operator[](std::size_t i) const { return codes_[i]; }
    const std::vector<CountryCode>& codes() const noexcept { return codes_; }

    std::optional<std::size_t> find(const CountryCode& code) const;
    std::optional<std::size_t> find(std::string_view code) const;
    /// Like find() but throws InputError naming the code.
    std::size_t index_of(const CountryCode& code) const;
    std::size_t index_of(std::string_view code) const;

    bool operator==(const CountryRegistry&) const = default;

private:
    std::vector<CountryCode> codes_;
};

}  // namespace geppml

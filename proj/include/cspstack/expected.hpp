#pragma once

#include <cassert>
#include <cstdint>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>

namespace cspstack {

enum class Error : std::uint8_t {
    InvalidConfig,
    PoolExhausted,
    StaleHandle,
    LengthExceedsBuffer,
    LengthMismatch,
    InvalidId,
    QueueFull,
    PortInUse,
    InvalidPort,
    Empty,
    AlreadyInitialized,
    IoError,
    CorruptCorpus,
    ParseError,
};

constexpr std::string_view to_string(Error e) noexcept {
    switch (e) {
        case Error::InvalidConfig: return "InvalidConfig";
        case Error::PoolExhausted: return "PoolExhausted";
        case Error::StaleHandle: return "StaleHandle";
        case Error::LengthExceedsBuffer: return "LengthExceedsBuffer";
        case Error::LengthMismatch: return "LengthMismatch";
        case Error::InvalidId: return "InvalidId";
        case Error::QueueFull: return "QueueFull";
        case Error::PortInUse: return "PortInUse";
        case Error::InvalidPort: return "InvalidPort";
        case Error::Empty: return "Empty";
        case Error::AlreadyInitialized: return "AlreadyInitialized";
        case Error::IoError: return "IoError";
        case Error::CorruptCorpus: return "CorruptCorpus";
        case Error::ParseError: return "ParseError";
    }
    return "Unknown";
}

/// Tag wrapper so `Expected<Error>`-like ambiguity never arises.
struct Unexpected {
    Error error;
};

constexpr Unexpected fail(Error e) noexcept { return Unexpected{e}; }

/// Value-or-error return. Protocol-level failures in this library are
/// ordinary outcomes and travel through this type instead of exceptions.
template <class T>
class Expected {
public:
    constexpr Expected(T value) : storage_(std::in_place_index<0>, std::move(value)) {}
    constexpr Expected(Unexpected u) : storage_(std::in_place_index<1>, u.error) {}

    constexpr bool has_value() const noexcept { return storage_.index() == 0; }
    constexpr explicit operator bool() const noexcept { return has_value(); }

    constexpr T& value() & {
        assert(has_value());
        return std::get<0>(storage_);
    }
    constexpr const T& value() const& {
        assert(has_value());
        return std::get<0>(storage_);
    }
    constexpr T&& value() && {
        assert(has_value());
        return std::get<0>(std::move(storage_));
    }
    constexpr T& operator*() & { return value(); }
    constexpr const T& operator*() const& { return value(); }
    constexpr T* operator->() { return &value(); }
    constexpr const T* operator->() const { return &value(); }

    constexpr Error error() const {
        assert(!has_value());
        return std::get<1>(storage_);
    }

private:
    std::variant<T, Error> storage_;
};

template <>
class Expected<void> {
public:
    constexpr Expected() noexcept = default;
    constexpr Expected(Unexpected u) noexcept : error_(u.error), ok_(false) {}

    constexpr bool has_value() const noexcept { return ok_; }
    constexpr explicit operator bool() const noexcept { return ok_; }
    constexpr Error error() const noexcept {
        assert(!ok_);
        return error_;
    }

private:
    Error error_{};
    bool ok_ = true;
};

using Status = Expected<void>;

}  // namespace cspstack

#pragma once

// Replacement global operator new/delete feeding daalder::alloc. Include in
// exactly one translation unit of a program.

#include <cstdlib>
#include <cstring>
#include <new>

#include "daalder/alloc_meter.hpp"

namespace daalder::alloc::detail {

// Every block carries a header just below the user pointer:
// [.. padding .. | offset to block start | requested size | user data].
inline void* allocate(std::size_t n, std::size_t align) noexcept {
  counters.installed.store(true, std::memory_order_relaxed);
  if (align < alignof(std::max_align_t)) align = alignof(std::max_align_t);
  const std::size_t header = align < 16 ? 16 : align;
  if (n > SIZE_MAX - header - align) return nullptr;
  if (!on_allocate(n)) return nullptr;
  std::size_t total = header + n;
  void* base;
  if (align <= alignof(std::max_align_t)) {
    base = std::malloc(total);
  } else {
    total = (total + align - 1) / align * align;
    base = std::aligned_alloc(align, total);
  }
  if (!base) {
    on_free(n);
    return nullptr;
  }
  auto* user = static_cast<unsigned char*>(base) + header;
  const std::size_t meta[2] = {header, n};
  std::memcpy(user - sizeof(meta), meta, sizeof(meta));
  return user;
}

inline void deallocate(void* p) noexcept {
  if (!p) return;
  auto* user = static_cast<unsigned char*>(p);
  std::size_t meta[2];
  std::memcpy(meta, user - sizeof(meta), sizeof(meta));
  on_free(meta[1]);
  std::free(user - meta[0]);
}

inline void* allocate_or_throw(std::size_t n, std::size_t align) {
  if (n == 0) n = 1;
  if (void* p = allocate(n, align)) return p;
  throw std::bad_alloc();
}

}  // namespace daalder::alloc::detail

void* operator new(std::size_t n) { return daalder::alloc::detail::allocate_or_throw(n, 0); }
void* operator new[](std::size_t n) { return daalder::alloc::detail::allocate_or_throw(n, 0); }
void* operator new(std::size_t n, std::align_val_t a) {
  return daalder::alloc::detail::allocate_or_throw(n, static_cast<std::size_t>(a));
}
void* operator new[](std::size_t n, std::align_val_t a) {
  return daalder::alloc::detail::allocate_or_throw(n, static_cast<std::size_t>(a));
}
void* operator new(std::size_t n, const std::nothrow_t&) noexcept {
  return daalder::alloc::detail::allocate(n ? n : 1, 0);
}
void* operator new[](std::size_t n, const std::nothrow_t&) noexcept {
  return daalder::alloc::detail::allocate(n ? n : 1, 0);
}
void* operator new(std::size_t n, std::align_val_t a, const std::nothrow_t&) noexcept {
  return daalder::alloc::detail::allocate(n ? n : 1, static_cast<std::size_t>(a));
}
void* operator new[](std::size_t n, std::align_val_t a, const std::nothrow_t&) noexcept {
  return daalder::alloc::detail::allocate(n ? n : 1, static_cast<std::size_t>(a));
}

void operator delete(void* p) noexcept { daalder::alloc::detail::deallocate(p); }
void operator delete[](void* p) noexcept { daalder::alloc::detail::deallocate(p); }
void operator delete(void* p, std::size_t) noexcept { daalder::alloc::detail::deallocate(p); }
void operator delete[](void* p, std::size_t) noexcept { daalder::alloc::detail::deallocate(p); }
void operator delete(void* p, std::align_val_t) noexcept { daalder::alloc::detail::deallocate(p); }
void operator delete[](void* p, std::align_val_t) noexcept { daalder::alloc::detail::deallocate(p); }
void operator delete(void* p, std::size_t, std::align_val_t) noexcept { daalder::alloc::detail::deallocate(p); }
void operator delete[](void* p, std::size_t, std::align_val_t) noexcept { daalder::alloc::detail::deallocate(p); }
void operator delete(void* p, const std::nothrow_t&) noexcept { daalder::alloc::detail::deallocate(p); }
void operator delete[](void* p, const std::nothrow_t&) noexcept { daalder::alloc::detail::deallocate(p); }
void operator delete(void* p, std::align_val_t, const std::nothrow_t&) noexcept {
  daalder::alloc::detail::deallocate(p);
}
void operator delete[](void* p, std::align_val_t, const std::nothrow_t&) noexcept {
  daalder::alloc::detail::deallocate(p);
}

/*
Copyright 2026 The telebench Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
//! Stable seed derivation.
//!
//! Sub-seeds are a fixed function of the master seed and a path of small
//! integers, so they never change across platforms, Rust versions or
//! dependency upgrades. Each path element is folded in with FNV-1a over its
//! little-endian bytes and the result is finished with the splitmix64 mixer.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a sub-seed from `master` and a path such as
/// `[stream, benchmark, task, class, index, rep]`.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    let mut h = FNV_OFFSET;
    for word in std::iter::once(master).chain(path.iter().copied()) {
        for b in word.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    splitmix64(h)
}

/// Stream tags keep sub-seeds for different consumers independent.
pub mod stream {
    pub const SCENE: u64 = 1;
    pub const POSES: u64 = 2;
    pub const OPERATOR: u64 = 3;
    pub const CAMERA: u64 = 4;
}

// SPDX-License-Identifier: Apache-2.0

//! Criterion benchmarks for blockfuzz live in `benches/`.

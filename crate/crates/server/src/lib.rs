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
//! Live teleoperation: the `teleop.v1` codec, the per-operator session that
//! drives a trial, and the WebSocket service around it.

pub mod protocol;
pub mod session;
pub mod net;

pub use net::{Server, ServerConfig, ServerError, DEFAULT_PORT};

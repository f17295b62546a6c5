// Copyright 2026 pfgan contributors
// SPDX-License-Identifier: Apache-2.0
int main() { return 0; }

"""Fair p2p content delivery: downloading and streaming with on-chain arbitration."""

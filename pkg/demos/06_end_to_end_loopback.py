"""Full loopback session: server + client in one process, with injected delays.

Runs the synthetic backend (an exact oracle: raw heads encode the scripted
ground truth), streams 60 frames at 30 FPS over localhost UDP, and prints
the latency breakdown plus the end-to-end pose error, which is limited only
by the 24-byte float32 wire format.
"""

from posestream.bench import BenchConfig, bench_latency

print("identity run (no injected delays), 448x252 @ 30 FPS")
result = bench_latency(BenchConfig(frames=60, fps=30.0, width=448, height=252, seed=11))
print(result.report.format_text())
print("worst pose error: %.3e mm over %d frames"
      % (result.max_pose_error_m * 1000.0, result.frames_completed))

print("\nbudget run: +160 ms transmission, +12 ms inference, 256x256 @ 30 FPS")
result = bench_latency(BenchConfig(
    frames=60, fps=30.0, width=256, height=256, seed=12,
    send_delay_ms=160.0, infer_delay_ms=12.0,
))
print(result.report.format_text())
for warning in result.warnings:
    print("warning:", warning)

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{AcCounts, Outcome, PacketRecord, SimConfig, SimStats, Topology};
use crate::edca::{ac1_windows, Ac, SlotTiming};
use crate::error::Result;

const ARRIVAL: u8 = 0;
const TRANSMIT: u8 = 1;

#[derive(Debug, Default)]
struct AcState {
    /// Arrival times, head of line first.
    queue: VecDeque<u64>,
    in_service: bool,
    counter: u64,
    virtual_collisions: u32,
    /// Slot index of the current idle period from which the head-of-line
    /// packet may count down.
    base: u64,
    hol: u64,
    freezes: u32,
}

struct Station {
    /// End of the last busy period this station sensed; may lie ahead.
    idle_from: u64,
    generation: u64,
    acs: [AcState; 2],
    backoff_rng: ChaCha8Rng,
    arrival_rng: [ChaCha8Rng; 2],
    next_arrival: [f64; 2],
}

/// A transmission still on the medium.
struct OnAir {
    end: u64,
    station: usize,
    ac: usize,
    record: Option<usize>,
    collided: bool,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    timing: SlotTiming,
    aifsn: [u64; 2],
    w0: u64,
    w1: Vec<u64>,
    retry_limit: u32,
    end: u64,
    warmup: u64,
    half_width: usize,
    stations: Vec<Station>,
    events: BinaryHeap<Reverse<(u64, u8, usize, u64)>>,
    counts: [AcCounts; 2],
    records: Vec<PacketRecord>,
    active: Vec<OnAir>,
}

/// Runs one replication. Deterministic in `cfg.seed`.
pub fn run_simulation(cfg: &SimConfig) -> Result<SimStats> {
    cfg.validate()?;
    let mut e = Engine::new(cfg)?;
    e.run();
    Ok(e.finish())
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SimConfig) -> Result<Self> {
        let timing = SlotTiming::new(&cfg.edca);
        let half_width = match cfg.topology {
            Topology::SingleDomain => cfg.n_vehicles,
            Topology::LineWithRanges => (cfg.edca.cs_range / cfg.headway).floor() as usize,
        };
        let stations = (0..cfg.n_vehicles)
            .map(|k| {
                let id = 3 * k as u64;
                Station {
                    idle_from: 0,
                    generation: 0,
                    acs: Default::default(),
                    backoff_rng: stream(cfg.seed, id),
                    arrival_rng: [stream(cfg.seed, id + 1), stream(cfg.seed, id + 2)],
                    next_arrival: [f64::INFINITY; 2],
                }
            })
            .collect();
        Ok(Self {
            cfg,
            timing,
            aifsn: [cfg.edca.aifsn[0] as u64, cfg.edca.aifsn[1] as u64],
            w0: cfg.edca.w0(Ac::Ac0) as u64,
            w1: ac1_windows(&cfg.edca)?,
            retry_limit: cfg.edca.retry_limit,
            end: (cfg.duration * 1e6).round() as u64,
            warmup: (cfg.warmup * 1e6).round() as u64,
            half_width,
            stations,
            events: BinaryHeap::new(),
            counts: [AcCounts::default(); 2],
            records: Vec::new(),
            active: Vec::new(),
        })
    }

    fn neighbours(&self, s: usize) -> std::ops::Range<usize> {
        s.saturating_sub(self.half_width)..(s + self.half_width + 1).min(self.stations.len())
    }

    fn in_range(&self, a: usize, b: usize) -> bool {
        a.abs_diff(b) <= self.half_width
    }

    fn boundary(&self, idle_from: u64, m: u64) -> u64 {
        idle_from + self.timing.sifs_us + m * self.timing.slot_us
    }

    fn tx_time(&self, s: usize, ac: usize) -> Option<u64> {
        let st = &self.stations[s];
        let a = &st.acs[ac];
        a.in_service
            .then(|| self.boundary(st.idle_from, a.base.max(self.aifsn[ac]) + a.counter))
    }

    fn reschedule(&mut self, s: usize) {
        self.stations[s].generation += 1;
        let next = [0, 1].iter().filter_map(|&ac| self.tx_time(s, ac)).min();
        if let Some(t) = next {
            let g = self.stations[s].generation;
            self.events.push(Reverse((t, TRANSMIT, s, g)));
        }
    }

    fn schedule_arrival(&mut self, s: usize, ac: usize) {
        let t = self.stations[s].next_arrival[ac];
        if t.is_finite() && (t as u64) < self.end {
            self.events.push(Reverse((t as u64, ARRIVAL, s, ac as u64)));
        }
    }

    fn advance_arrival(&mut self, s: usize, ac: usize) {
        let st = &mut self.stations[s];
        st.next_arrival[ac] += if ac == 0 {
            Exp::new(self.cfg.lambda0)
                .unwrap()
                .sample(&mut st.arrival_rng[0])
                * 1e6
        } else {
            1e6 / self.cfg.lambda1
        };
    }

    fn draw(&mut self, s: usize, window: u64) -> u64 {
        self.stations[s].backoff_rng.random_range(0..window)
    }

    /// Puts the head of the queue into contention at instant `t`.
    fn begin_service(&mut self, s: usize, ac: usize, t: u64) {
        if self.stations[s].acs[ac].queue.is_empty() {
            self.stations[s].acs[ac].in_service = false;
            return;
        }
        let window = if ac == 0 { self.w0 } else { self.w1[0] };
        let counter = self.draw(s, window);
        let idle_from = self.stations[s].idle_from;
        let (base, hol) = if idle_from <= t {
            let rel = t - idle_from;
            let m = rel
                .saturating_sub(self.timing.sifs_us)
                .div_ceil(self.timing.slot_us);
            (m, self.boundary(idle_from, m))
        } else {
            (0, t)
        };
        let a = &mut self.stations[s].acs[ac];
        a.in_service = true;
        a.counter = counter;
        a.virtual_collisions = 0;
        a.base = base;
        a.hol = hol;
        a.freezes = 0;
    }

    fn run(&mut self) {
        for s in 0..self.stations.len() {
            if self.cfg.lambda0 > 0.0 {
                self.stations[s].next_arrival[0] = 0.0;
                self.advance_arrival(s, 0);
                self.schedule_arrival(s, 0);
            }
            if self.cfg.lambda1 > 0.0 {
                let period = 1e6 / self.cfg.lambda1;
                let st = &mut self.stations[s];
                st.next_arrival[1] = st.arrival_rng[1].random_range(0.0..period);
                self.schedule_arrival(s, 1);
            }
        }
        let mut due = Vec::new();
        while let Some(&Reverse((t, kind, s, payload))) = self.events.peek() {
            if t >= self.end {
                break;
            }
            self.events.pop();
            if kind == ARRIVAL {
                self.arrive(s, payload as usize, t);
                continue;
            }
            due.clear();
            if self.valid(s, payload, t) {
                due.push(s);
            }
            while let Some(&Reverse((t2, TRANSMIT, s2, g2))) = self.events.peek() {
                if t2 != t {
                    break;
                }
                self.events.pop();
                if self.valid(s2, g2, t) {
                    due.push(s2);
                }
            }
            if !due.is_empty() {
                let d = std::mem::take(&mut due);
                self.transmit(t, &d);
                due = d;
            }
        }
    }

    fn valid(&self, s: usize, generation: u64, t: u64) -> bool {
        self.stations[s].generation == generation && (0..2).any(|ac| self.tx_time(s, ac) == Some(t))
    }

    fn arrive(&mut self, s: usize, ac: usize, t: u64) {
        self.counts[ac].arrived += 1;
        self.stations[s].acs[ac].queue.push_back(t);
        if !self.stations[s].acs[ac].in_service {
            self.begin_service(s, ac, t);
            self.reschedule(s);
        }
        self.advance_arrival(s, ac);
        self.schedule_arrival(s, ac);
    }

    /// Station `r` senses the medium turn busy at `t` while idle. An AC loses
    /// the slots it completed plus the slot the busy period interrupts; for
    /// AC1 that slot starts `A₁` slots before its own AIFS ends, the window
    /// over which its blocking probability is defined.
    fn freeze(&mut self, r: usize, t: u64, transmitting: [bool; 2]) {
        let idle_from = self.stations[r].idle_from;
        let rel = t - idle_from;
        for (ac, &busy) in transmitting.iter().enumerate() {
            if busy || !self.stations[r].acs[ac].in_service {
                continue;
            }
            let aifsn = self.aifsn[ac];
            let offset = aifsn - self.aifsn[0].min(aifsn);
            let a = &mut self.stations[r].acs[ac];
            let start = a.base.max(aifsn);
            if rel >= self.timing.sifs_us {
                let m_b = (rel - self.timing.sifs_us) / self.timing.slot_us;
                if m_b + offset >= start && a.counter > 0 {
                    let done = m_b.saturating_sub(start) + 1;
                    debug_assert!(a.counter >= done, "countdown passed a transmission slot");
                    a.counter = a.counter.saturating_sub(done);
                    a.freezes += 1;
                }
            }
            a.base = 0;
        }
    }

    fn transmit(&mut self, t: u64, due: &[usize]) {
        let end = t + self.timing.transmission_us;
        let mut due_acs = Vec::with_capacity(due.len());
        for &s in due {
            let d = [self.tx_time(s, 0) == Some(t), self.tx_time(s, 1) == Some(t)];
            due_acs.push(d);
        }

        let mut touched = Vec::new();
        for &s in due {
            for r in self.neighbours(s) {
                if self.stations[r].idle_from <= t {
                    let transmitting = due
                        .iter()
                        .position(|&x| x == r)
                        .map_or([false; 2], |j| due_acs[j]);
                    self.freeze(r, t, transmitting);
                    touched.push(r);
                }
                let st = &mut self.stations[r];
                if st.idle_from < end {
                    st.idle_from = end;
                    touched.push(r);
                }
            }
        }

        self.active.retain(|a| a.end > t);
        for (&s, d) in due.iter().zip(&due_acs) {
            let ac = if d[0] { 0 } else { 1 };
            if d[0] && d[1] {
                self.virtual_collision(s, t);
            }
            let arrival = self.stations[s].acs[ac]
                .queue
                .pop_front()
                .expect("head of line present");
            self.counts[ac].transmitted += 1;
            let a = &self.stations[s].acs[ac];
            let idx = (arrival >= self.warmup).then(|| {
                self.records.push(PacketRecord {
                    station: s,
                    ac: if ac == 0 { Ac::Ac0 } else { Ac::Ac1 },
                    arrival_us: arrival,
                    hol_us: a.hol,
                    done_us: end,
                    outcome: Outcome::Clean,
                    freezes: a.freezes,
                });
                self.records.len() - 1
            });
            self.active.push(OnAir {
                end,
                station: s,
                ac,
                record: idx,
                collided: false,
            });
            let me = self.active.len() - 1;
            for k in 0..me {
                if self.in_range(s, self.active[k].station) {
                    self.mark_collided(k);
                    self.mark_collided(me);
                }
            }
            self.begin_service(s, ac, end);
        }
        touched.sort_unstable();
        touched.dedup();
        for r in touched {
            self.reschedule(r);
        }
    }

    /// Counts a transmission once however many others it overlaps.
    fn mark_collided(&mut self, k: usize) {
        let a = &mut self.active[k];
        if a.collided {
            return;
        }
        a.collided = true;
        self.counts[a.ac].external_collisions += 1;
        if let Some(i) = a.record {
            self.records[i].outcome = Outcome::Collided;
        }
    }

    /// AC1 loses the internal contention to AC0 at `t`.
    fn virtual_collision(&mut self, s: usize, t: u64) {
        self.counts[1].virtual_collisions += 1;
        let vc = self.stations[s].acs[1].virtual_collisions + 1;
        if vc > self.retry_limit {
            let arrival = self.stations[s].acs[1]
                .queue
                .pop_front()
                .expect("head of line present");
            self.counts[1].dropped += 1;
            if arrival >= self.warmup {
                let a = &self.stations[s].acs[1];
                self.records.push(PacketRecord {
                    station: s,
                    ac: Ac::Ac1,
                    arrival_us: arrival,
                    hol_us: a.hol,
                    done_us: t,
                    outcome: Outcome::Dropped,
                    freezes: a.freezes,
                });
            }
            self.begin_service(s, 1, t);
        } else {
            let window = self.w1[vc as usize];
            let counter = self.draw(s, window);
            let a = &mut self.stations[s].acs[1];
            a.virtual_collisions = vc;
            a.counter = counter;
            a.base = 0;
        }
    }

    fn finish(self) -> SimStats {
        let mut counts = self.counts;
        for st in &self.stations {
            for (c, a) in counts.iter_mut().zip(&st.acs) {
                c.queued_at_end += a.queue.len() as u64;
            }
        }
        SimStats {
            records: self.records,
            counts,
            timing: self.timing,
            end_us: self.end,
            warmup_us: self.warmup,
        }
    }
}

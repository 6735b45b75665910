package scheduler;

public class Timer {
    private long start;
    private long limit;

    public Timer(long start, long limit) {
        this.start = start;
        this.limit = limit;
    }

    public long elapsed(long now) {
        return now - start;
    }

    public boolean expired(long now) {
        long used = elapsed(now);
        return used > limit;
    }

    public long remaining(long now) {
        long used = elapsed(now);
        long left = limit - used;
        if (left < 0) {
            return 0;
        }
        return left;
    }

    public int percent(long now) {
        long used = elapsed(now);
        if (limit == 0) {
            return 100;
        }
        long p = used * 100 / limit;
        if (p > 100) {
            p = 100;
        }
        return (int) p;
    }

    public void extend(long extra) {
        limit = limit + extra;
    }
}

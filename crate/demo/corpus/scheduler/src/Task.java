package scheduler;

public class Task {
    private final String name;
    private final int priority;
    private final int duration;
    private int started = -1;

    public Task(String name, int priority, int duration) {
        this.name = name;
        this.priority = priority;
        this.duration = duration;
    }

    public String getName() {
        return name;
    }

    public int getPriority() {
        return priority;
    }

    public void start(int now) {
        started = now;
    }

    public boolean isRunning(int now) {
        int end = started + duration;
        return started >= 0 && now < end;
    }

    public int remaining(int now) {
        int end = started + duration;
        int left = end - now;
        if (left < 0) {
            left = 0;
        }
        return left;
    }

    public boolean outranks(Task other) {
        return priority > other.priority;
    }
}

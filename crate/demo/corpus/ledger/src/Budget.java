package ledger;

import java.util.HashMap;
import java.util.Map;

public class Budget {
    private final Map<String, Integer> limits = new HashMap<>();
    private final Map<String, Integer> spent = new HashMap<>();

    public void setLimit(String category, int limit) {
        limits.put(category, limit);
    }

    public void spend(String category, int amount) {
        int current = spent.getOrDefault(category, 0);
        spent.put(category, current + amount);
    }

    public int remaining(String category) {
        int limit = limits.getOrDefault(category, 0);
        int used = spent.getOrDefault(category, 0);
        return limit - used;
    }

    public boolean isOver(String category) {
        int limit = limits.getOrDefault(category, 0);
        int used = spent.getOrDefault(category, 0);
        return used > limit;
    }

    public int percentUsed(String category) {
        int limit = limits.getOrDefault(category, 0);
        int used = spent.getOrDefault(category, 0);
        if (limit == 0) {
            return 0;
        }
        return used * 100 / limit;
    }

    public int totalLimit() {
        int total = 0;
        for (int v : limits.values()) {
            total = total + v;
        }
        return total;
    }
}
